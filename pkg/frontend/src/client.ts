// Gateway client: folds incoming events into the session view and issues
// commands with fresh ids. Pending commands are ephemeral UI affordance
// (button spinners), deliberately kept out of SessionView so the view stays
// a pure function of the event stream.

import type { Command, CommandKind, EventMsg } from "./protocol.js";
import { applyEvent, initialView, type SessionView } from "./state.js";

export interface Transport {
  send(command: Command): void;
  onMessage(handler: (event: EventMsg) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export interface AckResult {
  commandId: string;
  accepted: boolean;
  reason?: string;
  roundTripMs: number;
}

interface PendingEntry {
  kind: CommandKind;
  sentAt: number;
  resolve: (ack: AckResult) => void;
}

export class GatewayClient {
  view: SessionView = initialView();
  connected = false;
  private counter = 0;
  private pending = new Map<string, PendingEntry>();
  private listeners: ((view: SessionView) => void)[] = [];

  constructor(private transport: Transport, private issuedBy = "console") {
    transport.onMessage((event) => this.ingest(event));
    transport.onClose(() => {
      this.connected = false;
      this.notify();
    });
    this.connected = true;
  }

  onChange(listener: (view: SessionView) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this.view);
    }
  }

  ingest(event: EventMsg): void {
    this.view = applyEvent(this.view, event);
    if (event.kind === "CommandAck") {
      const entry = this.pending.get(event.command_id);
      if (entry) {
        this.pending.delete(event.command_id);
        entry.resolve({
          commandId: event.command_id,
          accepted: event.accepted,
          reason: event.reason,
          roundTripMs: Date.now() - entry.sentAt,
        });
      }
    }
    this.notify();
  }

  isPending(kind: CommandKind): boolean {
    for (const entry of this.pending.values()) {
      if (entry.kind === kind) {
        return true;
      }
    }
    return false;
  }

  /** Send a command with a fresh command_id; repeated clicks of the same
   * kind are suppressed until the first one is acknowledged. */
  issueCommand(
    kind: CommandKind,
    extra: Partial<Command> = {}
  ): { commandId: string; ack: Promise<AckResult> } | null {
    if (this.isPending(kind)) {
      return null;
    }
    this.counter += 1;
    const commandId = `ui-${Date.now().toString(36)}-${this.counter}`;
    const command: Command = {
      v: 1,
      kind,
      command_id: commandId,
      issued_by: this.issuedBy,
      ...extra,
    };
    const ack = new Promise<AckResult>((resolve) => {
      this.pending.set(commandId, { kind, sentAt: Date.now(), resolve });
    });
    this.transport.send(command);
    return { commandId, ack };
  }

  close(): void {
    this.transport.close();
  }
}
