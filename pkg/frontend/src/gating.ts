// Command availability mirrors the gateway's transition table plus
// prompt-resolution validity; buttons outside this map stay disabled.

import type { CommandKind, Phase, ResolutionKind } from "./protocol.js";
import type { SessionView } from "./state.js";

// the operator-triggered entries of the transition table
export const OPERATOR_TRANSITIONS: Record<string, Phase> = {
  "Idle|StartMission": "PreScan",
  "ChargePlan|StartCharging": "Charging",
  "Charging|RePlan": "ChargePlan",
  "ChargePlan|ScanAgain": "DetectHoles",
};

const TICKING_PHASES: Phase[] = ["PreScan", "DetectHoles", "ChargePlan", "Charging"];

export function commandEnabled(view: SessionView, kind: CommandKind): boolean {
  switch (kind) {
    case "EStop":
      return true; // the safety stop is never gated
    case "Pause":
      return !view.paused && TICKING_PHASES.includes(view.phase);
    case "Resume":
      return view.paused;
    case "StartMission":
    case "StartCharging":
    case "RePlan":
    case "ScanAgain": {
      if (view.paused || view.prompt !== null) {
        return false;
      }
      if (kind === "StartCharging" && view.mission === null) {
        return false; // nothing planned to approve yet
      }
      return `${view.phase}|${kind}` in OPERATOR_TRANSITIONS;
    }
    case "ResolveAssistance":
      return view.prompt !== null;
    case "TeleopNudge":
      return view.prompt !== null && view.prompt.resolutions.includes("TeleopNudge");
    case "LoadSnapshot":
      return view.phase === "Idle" || view.paused;
    case "Shutdown":
      return true;
  }
}

export function resolutionEnabled(view: SessionView, resolution: ResolutionKind): boolean {
  return view.prompt !== null && view.prompt.resolutions.includes(resolution);
}
