// Live round trip against a local gateway: click-to-ack latency and the
// gated StartCharging flow over the real line-JSON protocol.

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/client.js";
import { commandEnabled } from "../src/gating.js";
import { connectTcp } from "../src/tcp.js";

let proc: ChildProcess;
let client: GatewayClient;
let port = 0;

async function waitFor(predicate: () => boolean, ms: number, what: string): Promise<void> {
  const deadline = Date.now() + ms;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "console-rt-"));
  writeFileSync(join(dir, "empty.json"), "[]");
  proc = spawn(
    "python3",
    [
      "-m",
      "chargerig.cli",
      "serve",
      "--listen",
      "127.0.0.1:0",
      "--snapshot-dir",
      join(dir, "snaps"),
      "--tick-rate",
      "200",
      "--max-ticks",
      "200000",
    ],
    { cwd: dir, stdio: ["ignore", "pipe", "pipe"] }
  );
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("gateway did not announce a port")), 15000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      const match = chunk.toString().match(/listening [\d.]+:(\d+)/);
      if (match) {
        port = Number(match[1]);
        clearTimeout(timer);
        resolve();
      }
    });
    proc.on("exit", (code) => reject(new Error(`gateway exited early: ${code}`)));
  });
  client = new GatewayClient(await connectTcp("127.0.0.1", port));
}, 30000);

afterAll(async () => {
  try {
    client?.issueCommand("Shutdown");
    await new Promise((resolve) => setTimeout(resolve, 300));
  } finally {
    client?.close();
    proc?.kill("SIGKILL");
  }
});

describe("command round trip against a local gateway", () => {
  it("receives a resync before incremental events", async () => {
    await waitFor(() => client.view.synced, 5000, "resync");
    expect(client.view.phase).toBe("Idle");
  });

  it("acknowledges a command in under a second", async () => {
    const issued = client.issueCommand("StartMission");
    expect(issued).not.toBeNull();
    const ack = await issued!.ack;
    expect(ack.accepted).toBe(true);
    expect(ack.roundTripMs).toBeLessThan(1000);
    await waitFor(() => client.view.phase === "PreScan", 5000, "PreScan");
  });

  it("suppresses duplicate clicks until the ack arrives", async () => {
    const first = client.issueCommand("Pause");
    const second = client.issueCommand("Pause");
    expect(first).not.toBeNull();
    expect(second).toBeNull(); // swallowed while pending
    const ack = await first!.ack;
    expect(ack.accepted).toBe(true);
    await waitFor(() => client.view.paused, 2000, "paused view");
    const resume = client.issueCommand("Resume");
    expect((await resume!.ack).accepted).toBe(true);
  });

  it("walks the gated flow to charging", async () => {
    await waitFor(() => commandEnabled(client.view, "StartCharging"), 30000, "plan ready");
    expect(client.view.phase).toBe("ChargePlan");
    const rejected = client.issueCommand("ScanAgain"); // valid here, try charging path instead
    const rejectedAck = await rejected!.ack;
    expect(rejectedAck.accepted).toBe(true); // ScanAgain from ChargePlan is legal
    await waitFor(() => commandEnabled(client.view, "StartCharging"), 30000, "plan ready again");
    const charging = client.issueCommand("StartCharging");
    const ack = await charging!.ack;
    expect(ack.accepted).toBe(true);
    await waitFor(() => client.view.phase === "Charging", 5000, "Charging phase");
    expect(commandEnabled(client.view, "StartCharging")).toBe(false);
    expect(commandEnabled(client.view, "RePlan")).toBe(true);
  }, 60000);

  it("rejects out-of-table commands with a reason", async () => {
    const bad = client.issueCommand("StartMission");
    const ack = await bad!.ack;
    expect(ack.accepted).toBe(false);
    expect(ack.reason).toContain("invalid transition");
  });
});
