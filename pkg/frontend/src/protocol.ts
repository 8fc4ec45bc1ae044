// Wire types for the gateway line-JSON protocol (schemas: docs/protocol/).

export type Phase =
  | "Idle"
  | "PreScan"
  | "DetectHoles"
  | "ChargePlan"
  | "Charging"
  | "MissionComplete";

export type HoleState =
  | "Detected"
  | "Planned"
  | "Charging"
  | "Charged"
  | "Failed"
  | "Skipped";

export type NodeStatus = "success" | "failure" | "running";

export interface Hole {
  id: string;
  x: number;
  y: number;
  depth: number;
  emulsion_target: number;
  detonator_type: string;
  state: HoleState;
}

export interface Mission {
  mission_id: string;
  revision: number;
  created_by: string;
  holes: Hole[];
  order: string[];
  planned_order: string[];
  popped: string[];
  detection_serial: number;
}

export type ResolutionKind =
  | "Retry"
  | "SkipHole"
  | "RePlan"
  | "ScanAgain"
  | "TeleopNudge"
  | "Abort";

export interface Prompt {
  phase: Phase;
  node_id: string;
  label: string;
  hole_id: string | null;
  resolutions: ResolutionKind[];
  detail: string;
}

export interface TickTrace {
  tick: number;
  phase: Phase;
  entries: [string, NodeStatus][];
  keys: string[];
}

interface EventBase {
  v: 1;
  seq: number;
  sim_time: number | null;
}

export type EventMsg = EventBase &
  (
    | {
        kind: "ResyncState";
        phase: Phase;
        paused: boolean;
        prompt: Prompt | null;
        mission: Mission | null;
        face: { w: number; h: number } | null;
        emulsion_pumped_kg: number;
      }
    | { kind: "PhaseChanged"; phase: Phase; previous: Phase | null; cause: string }
    | { kind: "TickTraceBatch"; traces: TickTrace[] }
    | { kind: "HoleUpdated"; hole: Hole; emulsion_pumped_kg: number }
    | { kind: "MissionUpdated"; mission: Mission | null }
    | { kind: "AssistancePromptRaised"; prompt: Prompt }
    | { kind: "AssistancePromptCleared"; resolution: string | null; event?: string | null }
    | { kind: "SnapshotWritten"; ref: string; cause: string }
    | {
        kind: "CommandAck";
        command_id: string;
        command: string;
        accepted: boolean;
        reason?: string;
      }
  );

export type CommandKind =
  | "StartMission"
  | "StartCharging"
  | "RePlan"
  | "ScanAgain"
  | "Pause"
  | "Resume"
  | "EStop"
  | "ResolveAssistance"
  | "TeleopNudge"
  | "LoadSnapshot"
  | "Shutdown";

export interface Command {
  v?: 1;
  kind: CommandKind;
  command_id: string;
  issued_by?: string;
  resolution?: ResolutionKind;
  args?: Record<string, unknown>;
  hole_id?: string;
  dx?: number;
  dy?: number;
  ref?: string;
  scenario_ref?: string;
}

// Tree document as served by GET /trees.json.
export interface TreeNodeJson {
  kind: "Sequence" | "Fallback" | "Parallel" | "Decorator" | "Action" | "Condition";
  id: string;
  label: string;
  memory?: boolean;
  success_threshold?: number | "all";
  decorator?: string;
  max_attempts?: number;
  behavior?: string;
  ports?: Record<string, string>;
  children?: TreeNodeJson[];
}

export interface TreeDocumentJson {
  format: number;
  blackboard: Record<string, string>;
  behaviors: Record<string, { kind: string; ports: Record<string, string> }>;
  trees: Record<string, TreeNodeJson>;
}
