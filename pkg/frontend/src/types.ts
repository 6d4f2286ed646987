// JSON shapes served by the operator API.

export interface TagPoint {
  outstation: number;
  type: string;
  index: number;
}

export interface ApiTagView {
  name: string;
  instMag: number | boolean | null;
  mag: number | boolean | null;
  validity: "good" | "invalid";
  timestamp: number | null;
  point: TagPoint;
  unit: string;
}

export interface SessionInfo {
  name: string;
  outstation: number;
  server: string;
  offline: boolean;
  message_sent_count: number;
  message_received_count: number;
  message_success_count: number;
  message_failure_count: number;
}

export interface ControlRequest {
  tag: string;
  action: "latch_on" | "latch_off" | "analog";
  value?: number;
  mode: "direct" | "select_operate";
}

export interface ControlResult {
  status: string;
  detail?: string;
}

export interface CommandEntry {
  wall_time: string;
  sim_time_s: number;
  source_address: number;
  peer: string;
  outstation: number;
  tag: string;
  command: string;
  outcome: string;
  count: number;
}

export interface SessionEvent {
  time: string;
  session: string;
  message: string;
}

export interface LogsResponse {
  commands: CommandEntry[];
  session_events: SessionEvent[];
}

export function isControllable(view: ApiTagView): boolean {
  return view.point.type === "BinaryOutput" || view.point.type === "AnalogOutput";
}
