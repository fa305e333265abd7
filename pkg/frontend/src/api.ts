/** Typed client for the orchestrator and signaling HTTP surfaces. */

export interface ExperimentSummary {
  id: string;
  kind: "FL" | "VR";
  nodes: number;
  available: number;
  queue_length: number;
}

export type EnterResult =
  | { state: "granted"; node_id: string; session_id: string }
  | { state: "queued"; token: number }
  | { state: "offline" | "pending" | "expired" | "left" };

export interface QueueStatus {
  status: "granted" | "queued" | "idle";
  token?: number;
  session_id?: string;
  node_id?: string;
  expires_at?: string;
}

export interface OutputPins {
  node_id: string;
  pins: Record<string, number | string>;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function asJson(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.error ?? `HTTP ${response.status}`);
  }
  return body;
}

export class ApiClient {
  token: string | null = null;

  constructor(
    public orchestratorUrl: string,
    public signalingUrl: string,
  ) {}

  private headers(): Record<string, string> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    return headers;
  }

  private async post(base: string, path: string, body: unknown): Promise<any> {
    const response = await fetch(`${base}${path}`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(body ?? {}),
    });
    return asJson(response);
  }

  private async get(base: string, path: string): Promise<any> {
    const response = await fetch(`${base}${path}`, { headers: this.headers() });
    return asJson(response);
  }

  async login(username: string, secret: string): Promise<string> {
    const body = await this.post(this.orchestratorUrl, "/api/login", { username, secret });
    this.token = body.token;
    return body.token;
  }

  async logout(): Promise<void> {
    await this.post(this.orchestratorUrl, "/api/logout", {});
    this.token = null;
  }

  listExperiments(): Promise<ExperimentSummary[]> {
    return this.get(this.orchestratorUrl, "/api/experiments").then((b) => b.experiments);
  }

  enter(experimentId: string, peerId: string): Promise<EnterResult> {
    return this.post(this.orchestratorUrl, `/api/experiments/${experimentId}/enter`, {
      peer_id: peerId,
    });
  }

  submitInput(experimentId: string, params: Record<string, unknown>): Promise<unknown> {
    return this.post(this.orchestratorUrl, `/api/experiments/${experimentId}/input`, params);
  }

  leave(experimentId: string): Promise<unknown> {
    return this.post(this.orchestratorUrl, `/api/experiments/${experimentId}/leave`, {});
  }

  queueStatus(experimentId: string): Promise<QueueStatus> {
    return this.get(this.orchestratorUrl, `/api/experiments/${experimentId}/queue`);
  }

  output(experimentId: string): Promise<OutputPins> {
    return this.get(this.orchestratorUrl, `/api/experiments/${experimentId}/output`);
  }

  book(experimentId: string, startIso: string, endIso: string): Promise<unknown> {
    return this.post(this.orchestratorUrl, `/api/experiments/${experimentId}/book`, {
      start: startIso,
      end: endIso,
    });
  }

  registerPeer(peerId: string): Promise<unknown> {
    return this.post(this.signalingUrl, "/peer/register", { peer_id: peerId });
  }

  streamUrl(peerId: string): string {
    const ws = this.signalingUrl.replace(/^http/, "ws");
    return `${ws}/peer/stream?peer_id=${encodeURIComponent(peerId)}`;
  }
}
