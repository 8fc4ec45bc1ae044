// DOM-free rendering of a SessionView to HTML/SVG strings; app.ts swaps the
// fragments into the page and binds clicks by data attributes.

import type { CommandKind, Hole, ResolutionKind } from "./protocol.js";
import type { TreeLayout } from "./layout.js";
import { commandEnabled, resolutionEnabled } from "./gating.js";
import { holeRows, type SessionView } from "./state.js";

export const STATUS_COLORS: Record<string, string> = {
  success: "#2ca02c",
  failure: "#d62728",
  running: "#ff9f1c",
  idle: "#9aa5b1",
};

export const HOLE_COLORS: Record<Hole["state"], string> = {
  Detected: "#9aa5b1",
  Planned: "#1f77b4",
  Charging: "#ff9f1c",
  Charged: "#2ca02c",
  Failed: "#d62728",
  Skipped: "#6b7280",
};

function esc(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const COMMAND_BUTTONS: { kind: CommandKind; label: string }[] = [
  { kind: "StartMission", label: "Start mission" },
  { kind: "StartCharging", label: "Start charging" },
  { kind: "RePlan", label: "Re-plan" },
  { kind: "ScanAgain", label: "Scan again" },
  { kind: "Pause", label: "Pause" },
  { kind: "Resume", label: "Resume" },
  { kind: "EStop", label: "E-STOP" },
];

export function renderHeader(view: SessionView, connected: boolean, pending: (kind: CommandKind) => boolean): string {
  const conn = connected ? "connected" : "connection lost";
  const badges = [
    `<span class="badge phase">${esc(view.phase)}</span>`,
    `<span class="badge ${connected ? "ok" : "bad"}">${conn}</span>`,
    view.paused ? '<span class="badge warn">paused</span>' : "",
    view.needsResync ? '<span class="badge bad">resyncing</span>' : "",
    `<span class="badge">t=${view.simTime}</span>`,
    `<span class="badge">${view.totalPumpedKg.toFixed(1)} kg pumped</span>`,
  ].join(" ");
  const buttons = COMMAND_BUTTONS.map(({ kind, label }) => {
    const enabled = commandEnabled(view, kind) && connected && !pending(kind);
    const classes = ["cmd", kind === "EStop" ? "estop" : ""].join(" ");
    return `<button class="${classes}" data-command="${kind}" ${enabled ? "" : "disabled"}>${esc(
      pending(kind) ? `${label}…` : label
    )}</button>`;
  }).join("");
  return `<div class="header">${badges}<nav>${buttons}</nav></div>`;
}

export function renderTree(view: SessionView, layout: TreeLayout | null): string {
  if (!layout) {
    return '<p class="placeholder">no tree for this phase</p>';
  }
  const cellW = 130;
  const cellH = 78;
  const width = layout.width * cellW + 40;
  const height = layout.height * cellH + 40;
  const position = new Map(layout.nodes.map((n) => [n.id, n]));
  const edges = layout.edges
    .map(([from, to]) => {
      const a = position.get(from)!;
      const b = position.get(to)!;
      return `<line x1="${a.x * cellW + 80}" y1="${a.y * cellH + 40}" x2="${b.x * cellW + 80}" y2="${
        b.y * cellH + 16
      }" stroke="#c3ccd6"/>`;
    })
    .join("");
  const nodes = layout.nodes
    .map((node) => {
      const status = view.nodeStatus[node.id] ?? "idle";
      const fill = STATUS_COLORS[status];
      const x = node.x * cellW + 80;
      const y = node.y * cellH + 28;
      const shape =
        node.kind === "Action" || node.kind === "Condition"
          ? `<ellipse cx="${x}" cy="${y}" rx="58" ry="17" fill="${fill}" opacity="0.88"/>`
          : `<rect x="${x - 58}" y="${y - 15}" width="116" height="30" rx="4" fill="${fill}" opacity="0.88"/>`;
      const label = esc(node.label.length > 19 ? node.label.slice(0, 18) + "…" : node.label);
      return `<g data-node="${node.id}"><title>${esc(node.id)} [${node.kind}] ${esc(
        node.detail
      )}: ${status}</title>${shape}<text x="${x}" y="${y + 4}" text-anchor="middle" font-size="10">${label}</text></g>`;
    })
    .join("");
  return `<svg viewBox="0 0 ${width} ${height}" class="tree">${edges}${nodes}</svg>`;
}

export function renderFaceMap(view: SessionView): string {
  const face = view.face ?? { w: 6, h: 4.5 };
  const scale = 90;
  const width = face.w * scale + 40;
  const height = face.h * scale + 40;
  const holes = holeRows(view)
    .map((hole) => {
      const cx = hole.x * scale + 20;
      const cy = height - (hole.y * scale + 20); // face y grows upward
      const fill = HOLE_COLORS[hole.state];
      const r = 7 + hole.depth * 2;
      return `<g data-hole="${hole.id}"><title>${hole.id}: ${hole.state}, ${hole.depth} m, ${
        view.pumpedKg[hole.id] ?? 0
      } kg</title><circle cx="${cx}" cy="${cy}" r="${r}" fill="${fill}" stroke="#22303c"/><text x="${cx}" y="${
        cy - r - 3
      }" text-anchor="middle" font-size="10">${hole.id}</text></g>`;
    })
    .join("");
  return `<svg viewBox="0 0 ${width} ${height}" class="face">${holes}</svg>`;
}

export function renderMissionTable(view: SessionView): string {
  if (!view.mission) {
    return '<p class="placeholder">no mission planned yet</p>';
  }
  const queue = new Set(view.mission.order);
  const rows = holeRows(view)
    .map((hole, i) => {
      const pumped = view.pumpedKg[hole.id] ?? 0;
      const queued = queue.has(hole.id) ? "queued" : "";
      return `<tr class="${queued}"><td>${i + 1}</td><td>${hole.id}</td><td>${hole.depth.toFixed(
        1
      )}</td><td>${hole.emulsion_target.toFixed(1)}</td><td>${pumped.toFixed(1)}</td><td class="state-${
        hole.state
      }">${hole.state}</td></tr>`;
    })
    .join("");
  return `<table class="mission"><thead><tr><th>#</th><th>hole</th><th>depth m</th><th>target kg</th><th>pumped kg</th><th>state</th></tr></thead><tbody>${rows}</tbody></table>
  <p class="mission-meta">mission ${esc(view.mission.mission_id)} rev ${view.mission.revision}, ${
    view.mission.order.length
  } holes queued</p>`;
}

const RESOLUTION_LABELS: Record<ResolutionKind, string> = {
  Retry: "Retry",
  SkipHole: "Skip hole",
  RePlan: "Re-plan",
  ScanAgain: "Scan again",
  TeleopNudge: "Nudge + retry",
  Abort: "Abort mission",
};

export function renderPrompt(view: SessionView): string {
  const prompt = view.prompt;
  if (!prompt) {
    return "";
  }
  const buttons = (Object.keys(RESOLUTION_LABELS) as ResolutionKind[])
    .map((resolution) => {
      const enabled = resolutionEnabled(view, resolution);
      return `<button class="resolve" data-resolution="${resolution}" ${
        enabled ? "" : "disabled"
      }>${RESOLUTION_LABELS[resolution]}</button>`;
    })
    .join("");
  return `<div class="prompt"><h3>Assistance needed</h3>
  <p>${esc(prompt.label || prompt.node_id)}${prompt.hole_id ? ` — hole ${esc(prompt.hole_id)}` : ""}</p>
  <p class="detail">${esc(prompt.detail)}</p>${buttons}</div>`;
}

export function renderEventLog(view: SessionView, limit = 40): string {
  const items = view.eventLog
    .slice(0, limit)
    .map(
      (entry) =>
        `<li><span class="seq">#${entry.seq}</span> <span class="kind">${entry.kind}</span> ${esc(
          entry.summary
        )}</li>`
    )
    .join("");
  return `<ul class="eventlog">${items}</ul>`;
}
