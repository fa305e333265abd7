/** DOM wiring: login, catalog, control panel, live viewer, queue badge, chart. */

import { ApiClient, ApiError, ExperimentSummary } from "./api.js";
import { Bar, buildBars, fleetLine, ReportSummary } from "./chart.js";
import { DecodedFrame, toRgba } from "./pgm.js";
import { GuardError, ViewStore } from "./state.js";
import { FrameStream } from "./stream.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

export class Dashboard {
  store = new ViewStore();
  stream = new FrameStream();
  peerId = `viewer-${Math.random().toString(36).slice(2, 10)}`;
  private catalogTimer: number | null = null;
  private pollTimer: number | null = null;
  private tiles = new Map<string, HTMLCanvasElement>();

  constructor(private api: ApiClient) {}

  mount(): void {
    el<HTMLFormElement>("login-form").addEventListener("submit", (e) => {
      e.preventDefault();
      this.login();
    });
    el<HTMLButtonElement>("leave-button").addEventListener("click", () => this.leave());
    el<HTMLFormElement>("control-form").addEventListener("submit", (e) => {
      e.preventDefault();
      this.submitControls();
    });
    el<HTMLInputElement>("summary-file").addEventListener("change", (e) => {
      const input = e.target as HTMLInputElement;
      if (input.files?.[0]) this.loadChart(input.files[0]);
    });
    this.store.subscribe(() => this.render());
    window.setInterval(() => {
      this.store.checkStale(Date.now());
    }, 1000);
    this.render();
  }

  // -- actions ---------------------------------------------------------------

  private async login(): Promise<void> {
    const username = el<HTMLInputElement>("login-user").value;
    const secret = el<HTMLInputElement>("login-secret").value;
    try {
      const token = await this.api.login(username, secret);
      this.store.loggedIn(username, token);
      await this.api.registerPeer(this.peerId);
      this.openStream();
      this.refreshCatalog();
      this.catalogTimer = window.setInterval(() => this.refreshCatalog(), 3000);
    } catch (err) {
      this.flash(err instanceof ApiError ? err.message : String(err));
    }
  }

  private openStream(): void {
    this.stream.open(this.api.streamUrl(this.peerId), {
      onFrame: (frame) => this.paintFrame(frame),
    });
  }

  private async refreshCatalog(): Promise<void> {
    try {
      const experiments = await this.api.listExperiments();
      this.renderCatalog(experiments);
    } catch {
      /* transient poll failure: keep the last rendering */
    }
  }

  async enter(experiment: ExperimentSummary): Promise<void> {
    if (this.pollTimer) window.clearInterval(this.pollTimer);
    this.store.selectExperiment(experiment.id, experiment.kind);
    const result = await this.api.enter(experiment.id, this.peerId);
    if (result.state === "granted") {
      this.store.granted(result.node_id, result.session_id);
      this.refreshOutputs();
    } else if (result.state === "queued") {
      this.store.queued(result.token);
    } else {
      this.flash(`experiment unavailable: ${result.state}`);
    }
    this.pollTimer = window.setInterval(() => this.pollQueue(), 1000);
  }

  private async pollQueue(): Promise<void> {
    const experimentId = this.store.state.experimentId;
    if (!experimentId) return;
    const status = await this.api.queueStatus(experimentId);
    if (status.status === "granted" && this.store.state.status.kind !== "granted") {
      this.store.granted(status.node_id ?? "", status.session_id ?? "");
      this.refreshOutputs();
    } else if (status.status === "queued" && status.token !== undefined) {
      this.store.queued(status.token);
    }
  }

  private async submitControls(): Promise<void> {
    const experimentId = this.store.state.experimentId;
    if (!experimentId) return;
    const kind = this.store.state.experimentKind;
    const steps = parseInt(el<HTMLInputElement>("steps-input").value, 10);
    const params =
      kind === "FL"
        ? { target: el<HTMLSelectElement>("target-select").value, steps }
        : { direction: el<HTMLSelectElement>("target-select").value, steps: Math.abs(steps) };
    try {
      await this.store.submitInput(params, (p) => this.api.submitInput(experimentId, p));
      window.setTimeout(() => this.refreshOutputs(), 800);
    } catch (err) {
      if (err instanceof GuardError) this.flash(err.message);
      else this.flash(String(err));
    }
  }

  private async refreshOutputs(): Promise<void> {
    const experimentId = this.store.state.experimentId;
    if (!experimentId || this.store.state.status.kind !== "granted") return;
    try {
      const output = await this.api.output(experimentId);
      this.store.pinsUpdated(output.pins);
    } catch {
      /* outputs lag behind session grants; the next poll catches up */
    }
  }

  private async leave(): Promise<void> {
    const experimentId = this.store.state.experimentId;
    if (experimentId) await this.api.leave(experimentId);
    if (this.pollTimer) window.clearInterval(this.pollTimer);
    this.store.left();
    this.tiles.clear();
    el("viewer-tiles").replaceChildren();
  }

  private async loadChart(file: File): Promise<void> {
    const summary = JSON.parse(await file.text()) as ReportSummary;
    this.renderChart(buildBars(summary), fleetLine(summary));
  }

  // -- rendering ----------------------------------------------------------------

  private paintFrame(frame: DecodedFrame): void {
    this.store.frameArrived(Date.now());
    const camera = frame.metadata["camera"] ?? "camera";
    let canvas = this.tiles.get(camera);
    if (!canvas) {
      canvas = document.createElement("canvas");
      canvas.width = frame.width;
      canvas.height = frame.height;
      canvas.title = camera;
      const tile = document.createElement("figure");
      tile.className = "tile";
      const label = document.createElement("figcaption");
      label.textContent = camera;
      tile.append(canvas, label);
      el("viewer-tiles").appendChild(tile);
      this.tiles.set(camera, canvas);
    }
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const image = new ImageData(toRgba(frame), frame.width, frame.height);
    ctx.putImageData(image, 0, 0);
  }

  private renderCatalog(experiments: ExperimentSummary[]): void {
    const list = el("catalog");
    list.replaceChildren();
    for (const experiment of experiments) {
      const row = document.createElement("li");
      const badge = document.createElement("span");
      badge.className = experiment.available > 0 ? "badge online" : "badge offline";
      badge.textContent =
        experiment.available > 0
          ? `${experiment.available}/${experiment.nodes} available`
          : "unavailable";
      const button = document.createElement("button");
      button.textContent = `enter ${experiment.id}`;
      button.addEventListener("click", () => this.enter(experiment));
      row.append(`${experiment.id} (${experiment.kind}) `, badge, " ", button);
      if (experiment.queue_length > 0) {
        row.append(` queue: ${experiment.queue_length}`);
      }
      list.appendChild(row);
    }
  }

  private renderChart(bars: Bar[], fleet: string): void {
    const canvas = el<HTMLCanvasElement>("chart-canvas");
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (bars.length === 0) {
      ctx.fillStyle = "#666";
      ctx.fillText("no availability data", 20, 40);
      return;
    }
    const barWidth = Math.min(60, (canvas.width - 40) / bars.length - 8);
    const maxH = canvas.height - 50;
    bars.forEach((bar, i) => {
      const x = 20 + i * (barWidth + 8);
      let y = canvas.height - 30;
      for (const [frac, color] of [
        [bar.onlineFrac, "#2e9e44"],
        [bar.partialFrac, "#e8a13c"],
        [bar.offlineFrac, "#c43f3f"],
      ] as const) {
        const h = frac * maxH;
        y -= h;
        ctx.fillStyle = color;
        ctx.fillRect(x, y, barWidth, h);
      }
      ctx.fillStyle = "#333";
      ctx.font = "10px sans-serif";
      ctx.fillText(`${bar.month.slice(5)} ${bar.experimentId.slice(0, 2)}`, x, canvas.height - 16);
    });
    el("fleet-line").textContent = fleet;
  }

  private render(): void {
    const state = this.store.state;
    el("login-panel").hidden = state.authToken !== null;
    el("workspace").hidden = state.authToken === null;

    const statusLabel = el("session-status");
    if (state.status.kind === "granted") {
      statusLabel.textContent = `in session on ${state.status.nodeId}`;
    } else if (state.status.kind === "queued") {
      statusLabel.textContent = `queued - token ${state.status.token}`;
    } else {
      statusLabel.textContent = "not in a session";
    }

    const enabled = this.store.controlsEnabled();
    el<HTMLFieldSetElement>("controls-fieldset").disabled = !enabled;
    el("controls-note").textContent = enabled
      ? ""
      : state.status.kind === "queued"
        ? `controls disabled while queued (token ${state.status.token})`
        : "enter an experiment to take control";

    el("stale-banner").hidden = !state.streamStale;

    const f = this.store.focalReadout();
    el("pin-u").textContent = String(state.pins["V0"] ?? "-");
    el("pin-v").textContent = String(state.pins["V1"] ?? "-");
    el("pin-f").textContent = f === null ? "-" : f.toFixed(2);

    const table = el("results-body");
    table.replaceChildren();
    for (const row of state.results) {
      const tr = document.createElement("tr");
      for (const value of [row.uCm.toFixed(2), row.vCm.toFixed(2), row.fCm.toFixed(2)]) {
        const td = document.createElement("td");
        td.textContent = value;
        tr.appendChild(td);
      }
      table.appendChild(tr);
    }
  }

  private flash(message: string): void {
    const banner = el("flash");
    banner.textContent = message;
    banner.hidden = false;
    window.setTimeout(() => {
      banner.hidden = true;
    }, 4000);
  }
}
