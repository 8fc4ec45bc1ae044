// Session view reducer: the rendered state is a pure fold over the gateway
// event stream, so replaying a recorded log rebuilds the exact same view.

import type {
  EventMsg,
  Hole,
  Mission,
  NodeStatus,
  Phase,
  Prompt,
} from "./protocol.js";

export const EVENT_LOG_CAP = 5000;

export interface LogEntry {
  seq: number;
  simTime: number | null;
  kind: string;
  summary: string;
}

export interface SessionView {
  phase: Phase;
  paused: boolean;
  simTime: number;
  lastSeq: number;
  needsResync: boolean;
  synced: boolean;
  mission: Mission | null;
  holes: Record<string, Hole>;
  pumpedKg: Record<string, number>;
  face: { w: number; h: number } | null;
  prompt: Prompt | null;
  nodeStatus: Record<string, NodeStatus>;
  lastTick: number;
  eventLog: LogEntry[]; // newest first, capped ring
  totalPumpedKg: number;
  snapshots: number;
}

export function initialView(): SessionView {
  return {
    phase: "Idle",
    paused: false,
    simTime: 0,
    lastSeq: 0,
    needsResync: false,
    synced: false,
    mission: null,
    holes: {},
    pumpedKg: {},
    face: null,
    prompt: null,
    nodeStatus: {},
    lastTick: 0,
    eventLog: [],
    totalPumpedKg: 0,
    snapshots: 0,
  };
}

function summarize(event: EventMsg): string {
  switch (event.kind) {
    case "PhaseChanged":
      return `phase -> ${event.phase} (${event.cause})`;
    case "HoleUpdated":
      return `${event.hole.id} -> ${event.hole.state}`;
    case "MissionUpdated":
      return event.mission
        ? `mission rev ${event.mission.revision}, ${event.mission.order.length} queued`
        : "mission cleared";
    case "AssistancePromptRaised":
      return `assistance: ${event.prompt.label || event.prompt.node_id}`;
    case "AssistancePromptCleared":
      return `resolved: ${event.resolution ?? "superseded"}`;
    case "SnapshotWritten":
      return `snapshot ${event.ref} (${event.cause})`;
    case "CommandAck":
      return `${event.command} ${event.accepted ? "accepted" : `rejected: ${event.reason ?? ""}`}`;
    case "TickTraceBatch":
      return `${event.traces.length} traces`;
    case "ResyncState":
      return `resync @ ${event.phase}`;
  }
}

function pushLog(view: SessionView, event: EventMsg): void {
  view.eventLog.unshift({
    seq: event.seq,
    simTime: event.sim_time,
    kind: event.kind,
    summary: summarize(event),
  });
  if (view.eventLog.length > EVENT_LOG_CAP) {
    view.eventLog.length = EVENT_LOG_CAP;
  }
}

function adoptMission(view: SessionView, mission: Mission | null): void {
  view.mission = mission;
  if (mission) {
    for (const hole of mission.holes) {
      view.holes[hole.id] = hole;
    }
  }
}

/** Fold one event into the view. Returns a new view object (shallow copy);
 * nested structures are replaced where touched. */
export function applyEvent(previous: SessionView, event: EventMsg): SessionView {
  const view: SessionView = {
    ...previous,
    holes: { ...previous.holes },
    pumpedKg: { ...previous.pumpedKg },
    nodeStatus: { ...previous.nodeStatus },
    eventLog: previous.eventLog.slice(),
  };
  // a gap in the per-connection sequence means lost events: ask for a resync
  if (view.lastSeq > 0 && event.seq !== view.lastSeq + 1) {
    view.needsResync = true;
  }
  view.lastSeq = event.seq;
  if (event.sim_time !== null && event.sim_time !== undefined) {
    view.simTime = event.sim_time;
  }

  switch (event.kind) {
    case "ResyncState": {
      view.phase = event.phase;
      view.paused = event.paused;
      view.prompt = event.prompt;
      view.face = event.face;
      view.holes = {};
      adoptMission(view, event.mission);
      view.totalPumpedKg = event.emulsion_pumped_kg;
      view.needsResync = false;
      view.synced = true;
      view.nodeStatus = {};
      break;
    }
    case "PhaseChanged": {
      view.phase = event.phase;
      view.nodeStatus = {}; // a new phase means a new tree
      if (event.phase === "Idle" || event.cause === "StartMission") {
        view.prompt = null;
      }
      break;
    }
    case "TickTraceBatch": {
      for (const trace of event.traces) {
        view.lastTick = trace.tick;
        for (const [nodeId, status] of trace.entries) {
          view.nodeStatus[nodeId] = status;
        }
      }
      break;
    }
    case "HoleUpdated": {
      view.holes[event.hole.id] = event.hole;
      view.pumpedKg[event.hole.id] = event.emulsion_pumped_kg;
      view.totalPumpedKg = Object.values(view.pumpedKg).reduce((a, b) => a + b, 0);
      if (view.mission && view.mission.holes.some((h) => h.id === event.hole.id)) {
        view.mission = {
          ...view.mission,
          holes: view.mission.holes.map((h) => (h.id === event.hole.id ? event.hole : h)),
        };
      }
      break;
    }
    case "MissionUpdated": {
      adoptMission(view, event.mission);
      break;
    }
    case "AssistancePromptRaised": {
      view.prompt = event.prompt;
      break;
    }
    case "AssistancePromptCleared": {
      view.prompt = null;
      break;
    }
    case "CommandAck": {
      if (event.accepted) {
        if (event.command === "Pause" || event.command === "EStop") {
          view.paused = true;
        } else if (event.command === "Resume") {
          view.paused = false;
        }
      }
      break;
    }
    case "SnapshotWritten": {
      view.snapshots = previous.snapshots + 1;
      break;
    }
  }
  pushLog(view, event);
  return view;
}

export function replay(events: EventMsg[]): SessionView {
  let view = initialView();
  for (const event of events) {
    view = applyEvent(view, event);
  }
  return view;
}

export function holeRows(view: SessionView): Hole[] {
  const order = view.mission?.planned_order ?? [];
  const ranked = order.filter((id) => view.holes[id]).map((id) => view.holes[id]);
  const rest = Object.values(view.holes)
    .filter((h) => !order.includes(h.id))
    .sort((a, b) => a.id.localeCompare(b.id));
  return [...ranked, ...rest];
}
