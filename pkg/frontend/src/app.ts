// Browser entry: consumes the gateway's HTTP mirror of the protocol
// (SSE events in, POST /command out) and re-renders on every event.

import type { Command, CommandKind, EventMsg, ResolutionKind, TreeDocumentJson } from "./protocol.js";
import { applyEvent, initialView, type SessionView } from "./state.js";
import { layoutTree, type TreeLayout } from "./layout.js";
import {
  renderEventLog,
  renderFaceMap,
  renderHeader,
  renderMissionTable,
  renderPrompt,
  renderTree,
} from "./render.js";

const PHASE_TREES: Record<string, string> = {
  PreScan: "PreScan",
  DetectHoles: "DetectHoles",
  ChargePlan: "ChargePlan",
  Charging: "Charging",
};

let view: SessionView = initialView();
let connected = false;
let trees: TreeDocumentJson | null = null;
const layouts: Record<string, TreeLayout> = {};
const pendingKinds = new Set<CommandKind>();
let counter = 0;

async function fetchTrees(): Promise<void> {
  if (trees) {
    return;
  }
  const response = await fetch("/trees.json");
  trees = (await response.json()) as TreeDocumentJson;
  for (const [name, root] of Object.entries(trees.trees)) {
    layouts[name] = layoutTree(root);
  }
  render();
}

function currentLayout(): TreeLayout | null {
  const name = PHASE_TREES[view.phase];
  return name ? (layouts[name] ?? null) : null;
}

function render(): void {
  const app = document.getElementById("app");
  if (!app) {
    return;
  }
  app.innerHTML = [
    renderHeader(view, connected, (kind) => pendingKinds.has(kind)),
    renderPrompt(view),
    '<div class="columns">',
    `<section><h2>Tree (${view.phase})</h2>${renderTree(view, currentLayout())}</section>`,
    `<section><h2>Rock face</h2>${renderFaceMap(view)}</section>`,
    "</div>",
    `<section><h2>Mission</h2>${renderMissionTable(view)}</section>`,
    `<section><h2>Events</h2>${renderEventLog(view)}</section>`,
  ].join("\n");
}

async function sendCommand(kind: CommandKind, extra: Partial<Command> = {}): Promise<void> {
  if (pendingKinds.has(kind)) {
    return; // duplicate click before the ack
  }
  counter += 1;
  const command: Command = {
    v: 1,
    kind,
    command_id: `web-${Date.now().toString(36)}-${counter}`,
    issued_by: "console",
    ...extra,
  };
  pendingKinds.add(kind);
  render();
  try {
    await fetch("/command", { method: "POST", body: JSON.stringify(command) });
  } finally {
    // the ack event clears the pending state; this is just a network failure net
    setTimeout(() => {
      pendingKinds.delete(kind);
      render();
    }, 3000);
  }
}

function onAck(event: EventMsg): void {
  if (event.kind === "CommandAck") {
    for (const kind of Array.from(pendingKinds)) {
      if (kind === event.command) {
        pendingKinds.delete(kind);
      }
    }
    if (!event.accepted && event.reason) {
      console.warn(`command rejected: ${event.reason}`);
    }
  }
}

function connect(): void {
  const source = new EventSource("/events");
  source.onopen = () => {
    connected = true;
    render();
  };
  source.onerror = () => {
    connected = false;
    render();
  };
  source.onmessage = (message) => {
    const event = JSON.parse(message.data) as EventMsg;
    view = applyEvent(view, event);
    onAck(event);
    render();
  };
}

document.addEventListener("click", (raw) => {
  const target = raw.target as HTMLElement;
  const command = target.closest("[data-command]")?.getAttribute("data-command") as CommandKind | null;
  if (command) {
    void sendCommand(command);
    return;
  }
  const resolution = target
    .closest("[data-resolution]")
    ?.getAttribute("data-resolution") as ResolutionKind | null;
  if (resolution) {
    void sendCommand("ResolveAssistance", { resolution });
  }
});

void fetchTrees();
connect();
render();
