// Mock service-api fixture: canned sessions/tags plus a scripted push
// stream replaying a setpoint ramp. Lets the console run (and be tested)
// with no backend at all: open index.html?mock=1.

import type { GridApi } from "./api.js";
import type {
  ApiTagView,
  ControlRequest,
  ControlResult,
  LogsResponse,
  SessionInfo,
} from "./types.js";

function tag(
  name: string,
  type: string,
  index: number,
  instMag: number | boolean,
  unit = "",
  validity: "good" | "invalid" = "good",
): ApiTagView {
  return {
    name,
    instMag,
    mag: typeof instMag === "number" ? instMag : null,
    validity,
    timestamp: Date.now(),
    point: { outstation: 560, type, index },
    unit,
  };
}

export const FIXTURE_TAGS: ApiTagView[] = [
  tag("AI_560_Generator_5262_1_MW", "AnalogInput", 0, 1211.0, "MW"),
  tag("AI_560_Generator_5262_1_MVAR", "AnalogInput", 1, 143.2, "MVar"),
  tag("AI_560_Branch_5047_5260_1_MW", "AnalogInput", 2, 289.0, "MW"),
  tag("AI_560_Branch_5047_5260_1_MVAR", "AnalogInput", 3, 233.3, "MVar"),
  tag("BI_560_Generator_5262_1_STATUS", "BinaryInput", 0, true),
  tag("BI_560_Branch_5047_5260_1_STATUS", "BinaryInput", 1, true),
  tag("AO_560_Generator_5262_1_MWSETPOINT", "AnalogOutput", 0, 1211.0, "MW"),
  tag("BO_560_Branch_5047_5260_1_STATUS", "BinaryOutput", 0, true),
  tag("AI_560_Bus_5262_VPU", "AnalogInput", 4, 1.02, "pu", "invalid"),
];

export const RAMP_STEPS = [1145.3, 1101.3, 1071.8, 1052.0, 1038.7, 1029.8, 1023.9];

export class MockApi implements GridApi {
  controls: ControlRequest[] = [];
  private listeners: ((views: ApiTagView[]) => void)[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  sessions(): Promise<SessionInfo[]> {
    return Promise.resolve([
      {
        name: "PowerWorld_RTAC_560",
        outstation: 560,
        server: "127.0.0.1:20000",
        offline: false,
        message_sent_count: 412,
        message_received_count: 410,
        message_success_count: 409,
        message_failure_count: 1,
      },
    ]);
  }

  tags(): Promise<ApiTagView[]> {
    return Promise.resolve(FIXTURE_TAGS.map((t) => ({ ...t })));
  }

  logs(): Promise<LogsResponse> {
    return Promise.resolve({
      commands: [
        {
          wall_time: "2024-01-01T00:00:00",
          sim_time_s: 42.0,
          source_address: 3,
          peer: "127.0.0.1:55012",
          outstation: 560,
          tag: "BO_560_Branch_5047_5260_1_STATUS",
          command: "open",
          outcome: "SUCCESS",
          count: 2,
        },
      ],
      session_events: [
        { time: "2024-01-01T00:00:00", session: "PowerWorld_RTAC_560",
          message: "integrity poll ok" },
      ],
    });
  }

  control(request: ControlRequest): Promise<ControlResult> {
    this.controls.push(request);
    return Promise.resolve({ status: "SUCCESS", detail: `${request.action} accepted` });
  }

  stream(onDeltas: (views: ApiTagView[]) => void): () => void {
    this.listeners.push(onDeltas);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== onDeltas);
    };
  }

  // test/demo hooks -------------------------------------------------------

  push(views: ApiTagView[]): void {
    for (const listener of this.listeners) listener(views);
  }

  startRampReplay(periodMs = 1000): void {
    let step = 0;
    this.timer = setInterval(() => {
      const mw = RAMP_STEPS[step % RAMP_STEPS.length];
      step += 1;
      this.push([
        tag("AI_560_Generator_5262_1_MW", "AnalogInput", 0, mw, "MW"),
      ]);
    }, periodMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
  }
}
