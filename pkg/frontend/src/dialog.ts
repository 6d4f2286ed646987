// Control dialog: pick the action, then an explicit confirm step that
// echoes exactly what will be sent. Nothing goes on the wire on cancel.

import { ApiError, type GridApi } from "./api.js";
import type { ApiTagView, ControlRequest } from "./types.js";

export class ControlDialog {
  private root: HTMLDivElement;
  private pending: ControlRequest | null = null;

  constructor(
    private container: HTMLElement,
    private api: GridApi,
    private onResult: (message: string, ok: boolean) => void = () => undefined,
  ) {
    this.root = document.createElement("div");
    this.root.className = "dialog hidden";
    this.container.appendChild(this.root);
  }

  get visible(): boolean {
    return !this.root.classList.contains("hidden");
  }

  openFor(view: ApiTagView): void {
    this.pending = null;
    this.root.classList.remove("hidden");
    this.root.innerHTML = "";
    const title = document.createElement("h3");
    title.textContent = view.name;
    this.root.appendChild(title);

    if (view.point.type === "BinaryOutput") {
      this.addActionButton(view, "latch_on");
      this.addActionButton(view, "latch_off");
    } else {
      const input = document.createElement("input");
      input.type = "number";
      input.className = "analog-value";
      input.placeholder = view.unit || "value";
      const send = document.createElement("button");
      send.textContent = "set value";
      send.className = "action-analog";
      send.addEventListener("click", () => {
        const value = Number(input.value);
        if (!Number.isFinite(value)) return;
        this.stageConfirm({ tag: view.name, action: "analog", value, mode: "direct" });
      });
      this.root.appendChild(input);
      this.root.appendChild(send);
    }
    this.addCancel();
  }

  private addActionButton(view: ApiTagView, action: "latch_on" | "latch_off"): void {
    const button = document.createElement("button");
    button.textContent = action.replace("_", " ");
    button.className = `action-${action}`;
    button.addEventListener("click", () =>
      this.stageConfirm({ tag: view.name, action, mode: "direct" }),
    );
    this.root.appendChild(button);
  }

  private stageConfirm(request: ControlRequest): void {
    this.pending = request;
    this.root.innerHTML = "";
    const echo = document.createElement("p");
    echo.className = "confirm-echo";
    const value = request.value !== undefined ? ` = ${request.value}` : "";
    echo.textContent = `Send ${request.action}${value} to ${request.tag}?`;
    this.root.appendChild(echo);
    const confirm = document.createElement("button");
    confirm.textContent = "confirm";
    confirm.className = "confirm-send";
    confirm.addEventListener("click", () => void this.confirm());
    this.root.appendChild(confirm);
    this.addCancel();
  }

  async confirm(): Promise<void> {
    if (!this.pending) return;
    const request = this.pending;
    this.pending = null;
    this.close();
    try {
      const result = await this.api.control(request);
      this.onResult(`${request.tag}: ${result.status}`, result.status === "SUCCESS");
    } catch (error) {
      const message = error instanceof ApiError ? error.message : String(error);
      this.onResult(message, false);
    }
  }

  cancel(): void {
    this.pending = null;
    this.close();
  }

  private addCancel(): void {
    const cancel = document.createElement("button");
    cancel.textContent = "cancel";
    cancel.className = "cancel";
    cancel.addEventListener("click", () => this.cancel());
    this.root.appendChild(cancel);
  }

  private close(): void {
    this.root.classList.add("hidden");
    this.root.innerHTML = "";
  }
}
