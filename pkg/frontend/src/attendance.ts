// Live attendance view-model, kept separate from the DOM so the poll
// behaviour is testable: while a session is open the displayed counter only
// moves up, stale poll replies are dropped, and the stop response is
// authoritative for the final count.

import type { ApiClient, Envelope } from "./api";
import { LatestWins } from "./poll";

export interface SessionSnapshot {
  session_id: string;
  group_id: string;
  present_count: number;
  state: string;
  code?: string;
}

export interface AttendanceApi {
  startAttendance(group: string, code?: string): Promise<Envelope<SessionSnapshot>>;
  stopAttendance(group: string): Promise<Envelope<SessionSnapshot>>;
  getSession(id: string): Promise<Envelope<SessionSnapshot>>;
}

/** Thin adapter from the generic client to the calls this view makes. */
export function attendanceApi(client: ApiClient): AttendanceApi {
  return {
    startAttendance: (group, code) =>
      client.request("attendance", {
        query: { group, status: "start", ...(code ? { code } : {}) },
      }),
    stopAttendance: (group) =>
      client.request("attendance", { query: { group, status: "stop" } }),
    getSession: (id) => client.request("getSession", { id }),
  };
}

export type AttendancePhase = "idle" | "open" | "closed";

export class AttendanceLive {
  phase: AttendancePhase = "idle";
  sessionId: string | null = null;
  code: string | null = null;
  present = 0;
  lastMessage = "";

  private readonly order = new LatestWins();

  constructor(private readonly api: AttendanceApi) {}

  async start(group: string, code?: string): Promise<void> {
    const envelope = await this.api.startAttendance(group, code);
    const data = envelope.data!;
    this.phase = "open";
    this.sessionId = data.session_id;
    this.code = data.code ?? null;
    this.present = 0;
    this.lastMessage = envelope.message;
  }

  /** One poll beat. Safe to race: out-of-date replies are discarded. */
  async poll(): Promise<void> {
    if (this.phase !== "open" || !this.sessionId) return;
    const ticket = this.order.begin();
    const envelope = await this.api.getSession(this.sessionId);
    if (!this.order.accept(ticket)) return; // a newer reply already landed
    if (this.phase !== "open") return; // stopped while in flight
    const count = envelope.data!.present_count;
    if (count > this.present) this.present = count;
  }

  async stop(group: string): Promise<void> {
    const envelope = await this.api.stopAttendance(group);
    this.phase = "closed";
    this.present = envelope.data!.present_count;
    this.lastMessage = envelope.message;
  }
}
