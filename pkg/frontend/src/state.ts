/** View-state machine for the dashboard.
 *
 * The machine is the single authority on what the user may do: control
 * submissions are physically impossible unless the session is granted, and
 * the queue-token history is tracked so the display provably counts down.
 */

import { computeFocalLength } from "./lens.js";

export type SessionStatus =
  | { kind: "idle" }
  | { kind: "queued"; token: number }
  | { kind: "granted"; nodeId: string; sessionId: string };

export interface ResultRow {
  uCm: number;
  vCm: number;
  fCm: number;
}

export interface ViewState {
  authToken: string | null;
  username: string | null;
  experimentId: string | null;
  experimentKind: "FL" | "VR" | null;
  status: SessionStatus;
  pins: Record<string, number | string>;
  results: ResultRow[];
  tokenHistory: number[];
  lastFrameAtMs: number | null;
  streamStale: boolean;
}

export class GuardError extends Error {}

type Listener = (state: ViewState) => void;

export class ViewStore {
  state: ViewState = {
    authToken: null,
    username: null,
    experimentId: null,
    experimentKind: null,
    status: { kind: "idle" },
    pins: {},
    results: [],
    tokenHistory: [],
    lastFrameAtMs: null,
    streamStale: false,
  };

  private listeners: Listener[] = [];

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  // -- transitions -----------------------------------------------------------

  loggedIn(username: string, token: string): void {
    this.state.authToken = token;
    this.state.username = username;
    this.emit();
  }

  loggedOut(): void {
    this.state.authToken = null;
    this.state.username = null;
    this.reset();
  }

  selectExperiment(id: string, kind: "FL" | "VR"): void {
    this.state.experimentId = id;
    this.state.experimentKind = kind;
    this.state.status = { kind: "idle" };
    this.state.tokenHistory = [];
    this.state.results = [];
    this.emit();
  }

  granted(nodeId: string, sessionId: string): void {
    this.state.status = { kind: "granted", nodeId, sessionId };
    this.emit();
  }

  queued(token: number): void {
    const history = this.state.tokenHistory;
    if (history.length === 0 || history[history.length - 1] !== token) {
      history.push(token);
    }
    this.state.status = { kind: "queued", token };
    this.emit();
  }

  left(): void {
    this.state.status = { kind: "idle" };
    this.state.tokenHistory = [];
    this.emit();
  }

  pinsUpdated(pins: Record<string, number | string>): void {
    this.state.pins = pins;
    const f = this.focalReadout();
    if (f !== null) {
      const u = Number(pins["V0"]);
      const v = Number(pins["V1"]);
      const last = this.state.results[this.state.results.length - 1];
      if (!last || last.uCm !== u || last.vCm !== v) {
        this.state.results.push({ uCm: u, vCm: v, fCm: f });
      }
    }
    this.emit();
  }

  frameArrived(nowMs: number): void {
    this.state.lastFrameAtMs = nowMs;
    this.state.streamStale = false;
    this.emit();
  }

  checkStale(nowMs: number, staleAfterMs = 5000): boolean {
    const last = this.state.lastFrameAtMs;
    const stale =
      this.state.status.kind === "granted" && last !== null && nowMs - last > staleAfterMs;
    if (stale !== this.state.streamStale) {
      this.state.streamStale = stale;
      this.emit();
    }
    return stale;
  }

  private reset(): void {
    this.state.experimentId = null;
    this.state.experimentKind = null;
    this.state.status = { kind: "idle" };
    this.state.pins = {};
    this.state.results = [];
    this.state.tokenHistory = [];
    this.state.lastFrameAtMs = null;
    this.state.streamStale = false;
    this.emit();
  }

  // -- guards and derived values ------------------------------------------------

  controlsEnabled(): boolean {
    return this.state.status.kind === "granted";
  }

  /** The only path through which the UI posts /input. Throws unless granted. */
  async submitInput(
    params: Record<string, unknown>,
    post: (params: Record<string, unknown>) => Promise<unknown>,
  ): Promise<unknown> {
    if (!this.controlsEnabled()) {
      throw new GuardError(`controls disabled while ${this.state.status.kind}`);
    }
    return post(params);
  }

  /** Client-side focal length from the latest output pins (FL rigs only). */
  focalReadout(): number | null {
    if (this.state.experimentKind !== "FL") return null;
    const u = Number(this.state.pins["V0"]);
    const v = Number(this.state.pins["V1"]);
    if (!isFinite(u) || !isFinite(v) || u <= 0 || v <= 0) return null;
    return computeFocalLength(u, v);
  }

  /** True when every queue-token update moved strictly toward the front. */
  tokenHistoryMonotonic(): boolean {
    const history = this.state.tokenHistory;
    return history.every((t, i) => i === 0 || t < history[i - 1]);
  }

  reachedFrontBeforeGrant(): boolean {
    if (this.state.tokenHistory.length === 0) return true; // direct grant
    return this.state.tokenHistory[this.state.tokenHistory.length - 1] === 1;
  }
}
