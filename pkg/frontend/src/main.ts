// Wire-up: session picker, tag board fed by the push stream, control
// dialog, health/log pane, and a visible banner while the stream is down.

import { ApiClient, type GridApi } from "./api.js";
import { TagBoard } from "./board.js";
import { ControlDialog } from "./dialog.js";
import { HealthPane } from "./health.js";
import { MockApi } from "./mock.js";

const LOG_REFRESH_MS = 2000;
const RECONNECT_MS = 2000;

export class Console {
  board: TagBoard;
  dialog: ControlDialog;
  health: HealthPane;
  banner: HTMLDivElement;
  toast: HTMLDivElement;
  private closeStream: (() => void) | null = null;
  private timers: ReturnType<typeof setInterval>[] = [];

  constructor(private root: HTMLElement, private api: GridApi) {
    this.banner = document.createElement("div");
    this.banner.className = "banner hidden";
    this.banner.textContent = "stream offline — reconnecting";
    root.appendChild(this.banner);

    this.toast = document.createElement("div");
    this.toast.className = "toast hidden";
    root.appendChild(this.toast);

    const boardHost = document.createElement("div");
    boardHost.className = "board-host";
    root.appendChild(boardHost);
    this.dialog = new ControlDialog(root, api, (message, ok) =>
      this.showToast(message, ok),
    );
    this.board = new TagBoard(boardHost, {}, (view) => this.dialog.openFor(view));

    const healthHost = document.createElement("div");
    healthHost.className = "health-host";
    root.appendChild(healthHost);
    this.health = new HealthPane(healthHost);
  }

  async start(): Promise<void> {
    this.board.load(await this.api.tags());
    await this.refreshPanes();
    this.subscribe();
    this.timers.push(setInterval(() => void this.refreshPanes(), LOG_REFRESH_MS));
    this.timers.push(setInterval(() => this.board.render(), LOG_REFRESH_MS));
  }

  stop(): void {
    this.closeStream?.();
    for (const timer of this.timers) clearInterval(timer);
  }

  private subscribe(): void {
    this.closeStream?.();
    this.closeStream = this.api.stream(
      (views) => {
        this.banner.classList.add("hidden");
        this.board.applyDeltas(views);
      },
      () => {
        this.banner.classList.remove("hidden");
        this.closeStream?.();
        setTimeout(() => this.subscribe(), RECONNECT_MS);
      },
    );
  }

  private async refreshPanes(): Promise<void> {
    try {
      this.health.renderSessions(await this.api.sessions());
      this.health.renderLogs(await this.api.logs());
    } catch {
      // API hiccups surface through the stream banner; keep the last pane
    }
  }

  private showToast(message: string, ok: boolean): void {
    this.toast.textContent = message;
    this.toast.className = `toast ${ok ? "ok" : "error"}`;
    setTimeout(() => this.toast.classList.add("hidden"), 4000);
  }
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const mock = new URLSearchParams(window.location.search).has("mock");
  const api = mock ? new MockApi() : new ApiClient("");
  if (api instanceof MockApi) api.startRampReplay();
  const console_ = new Console(root, api);
  void console_.start();
}

if (typeof window !== "undefined" && typeof document !== "undefined"
    && document.getElementById("app")) {
  boot();
}
