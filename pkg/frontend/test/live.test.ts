/** Drives the real platform over the wire: login, enter, control, stream.
 *
 * Spawns the backend's serve command in a child process. Skipped when the
 * backend package is not importable in this environment.
 */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import assert from "node:assert/strict";
import test from "node:test";

import { ApiClient } from "../src/api.js";
import { DecodedFrame } from "../src/pgm.js";
import { ViewStore } from "../src/state.js";
import { FrameStream } from "../src/stream.js";
import { NodeWebSocket } from "./helpers/nodews.js";

function backendAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import remotelab"], { timeout: 20000 });
  return probe.status === 0;
}

interface Stack {
  child: ChildProcess;
  orchestrator: string;
  signaling: string;
  cloud: string;
}

async function startStack(): Promise<Stack> {
  const dir = mkdtempSync(join(tmpdir(), "remotelab-ui-"));
  const configPath = join(dir, "config.json");
  const init = spawnSync("python3", ["-m", "remotelab.cli", "init-config", "--vr-nodes", "0"], {
    encoding: "utf-8",
  });
  const config = JSON.parse(init.stdout);
  config.orchestrator_bind = "127.0.0.1:0";
  config.cloud_bind = "127.0.0.1:0";
  config.signaling_bind = "127.0.0.1:0";
  writeFileSync(configPath, JSON.stringify(config));

  const child = spawn(
    "python3",
    [
      "-m",
      "remotelab.cli",
      "serve",
      "--config",
      configPath,
      "--roles",
      "cloud,signaling,orchestrator,agents",
    ],
    { stdio: ["ignore", "pipe", "inherit"] },
  );

  const addresses: Record<string, string> = {};
  await new Promise<void>((resolve, reject) => {
    const timer = setTimeout(() => reject(new Error("stack did not become ready")), 30000);
    let buffered = "";
    child.stdout!.on("data", (chunk: Buffer) => {
      buffered += chunk.toString();
      let newline;
      while ((newline = buffered.indexOf("\n")) >= 0) {
        const line = buffered.slice(0, newline);
        buffered = buffered.slice(newline + 1);
        if (!line.trim()) continue;
        const event = JSON.parse(line);
        if (event.event === "listening") addresses[event.role] = event.addr;
        if (event.event === "ready") {
          clearTimeout(timer);
          resolve();
        }
      }
    });
    child.on("exit", (code) => reject(new Error(`serve exited early (${code})`)));
  });
  return {
    child,
    orchestrator: `http://${addresses["orchestrator"]}`,
    signaling: `http://${addresses["signaling"]}`,
    cloud: `http://${addresses["cloud"]}`,
  };
}

async function waitFor<T>(
  poll: () => Promise<T | null>,
  timeoutMs: number,
  what: string,
): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const value = await poll();
    if (value !== null) return value;
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error(`timed out waiting for ${what}`);
}

test("dashboard flow against the live stack", { timeout: 120000 }, async (t) => {
  if (!backendAvailable()) {
    t.skip("backend package not importable; skipping live test");
    return;
  }
  const stack = await startStack();
  const store = new ViewStore();
  const api = new ApiClient(stack.orchestrator, stack.signaling);
  try {
    // login and catalog with availability badge data
    const token = await api.login("user-1", "pw-1");
    store.loggedIn("user-1", token);
    const catalog = await api.listExperiments();
    assert.equal(catalog[0].id, "focal-length");
    assert.equal(catalog[0].available, 1);

    // stream first, then enter: tiles appear as soon as the device calls
    const peerId = "ui-live-viewer";
    await api.registerPeer(peerId);
    const frames: DecodedFrame[] = [];
    const stream = new FrameStream((url) => new NodeWebSocket(url));
    stream.open(api.streamUrl(peerId), {
      onFrame: (frame) => {
        frames.push(frame);
        store.frameArrived(Date.now());
      },
    });

    store.selectExperiment("focal-length", "FL");
    const entered = await api.enter("focal-length", peerId);
    assert.equal(entered.state, "granted");
    if (entered.state === "granted") store.granted(entered.node_id, entered.session_id);
    assert.equal(store.controlsEnabled(), true);

    // live view: >= 1 fps per camera and both cameras produce tiles
    const t0 = Date.now();
    await waitFor(
      async () => (frames.length >= 10 ? true : null),
      15000,
      "ten stream frames",
    );
    const elapsedS = (Date.now() - t0) / 1000;
    const cameras = new Set(frames.map((f) => f.metadata["camera"]));
    assert.deepEqual(
      [...cameras].sort(),
      ["fl-1-screen", "fl-1-side"],
      "two tiles for the two-camera node",
    );
    for (const camera of cameras) {
      const count = frames.filter((f) => f.metadata["camera"] === camera).length;
      assert.ok(count / elapsedS >= 1, `camera ${camera} under 1 fps`);
    }

    // steer the platforms to a measured pair from the bench table:
    // u: 20 cm -> 20.59 cm (+590 steps), v: 20 cm -> 20.38 cm (+380 steps)
    await store.submitInput({ target: "object", steps: 590 }, (p) =>
      api.submitInput("focal-length", p),
    );
    await waitFor(async () => {
      const output = await api.output("focal-length");
      return Number(output.pins["V0"]) === 20.59 ? true : null;
    }, 10000, "object platform at 20.59 cm");

    await store.submitInput({ target: "screen", steps: 380 }, (p) =>
      api.submitInput("focal-length", p),
    );
    const pins = await waitFor(async () => {
      const output = await api.output("focal-length");
      return Number(output.pins["V1"]) === 20.38 ? output.pins : null;
    }, 10000, "screen platform at 20.38 cm");

    // the client-side focal readout lands on the measured-table value
    store.pinsUpdated(pins);
    const f = store.focalReadout();
    assert.ok(f !== null && Math.abs(f - 10.24) <= 0.01, `f readout ${f}`);
    assert.deepEqual(store.state.results.at(-1), { uCm: 20.59, vCm: 20.38, fCm: f });

    await api.leave("focal-length");
    store.left();
    assert.equal(store.controlsEnabled(), false);
    stream.close();
  } finally {
    stack.child.kill("SIGTERM");
    await new Promise((r) => setTimeout(r, 300));
    stack.child.kill("SIGKILL");
  }
});
