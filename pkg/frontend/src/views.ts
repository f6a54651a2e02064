// DOM wiring for each console screen. Logic that merits tests lives in the
// sibling modules (attendance.ts, dashboard.ts, validate.ts, charts.ts);
// these functions only render state and forward form input.

import { ApiClient, ApiError } from "./api";
import { AttendanceLive, attendanceApi } from "./attendance";
import { complexSurveyBody, emptyQuestion, simpleSurveyBody } from "./builder";
import type { ComplexSurveyDraft, QuestionDraft } from "./builder";
import { renderHistogram } from "./charts";
import {
  COMMAND_CATEGORIES,
  applyHealth,
  applyPresence,
  initialDashboard,
  markUnreachable,
  presencePanels,
} from "./dashboard";
import { LatestWins, startPolling } from "./poll";
import type { ConsoleSettings } from "./settings";
import { clearApiKey, maskKey, saveSettings } from "./settings";
import {
  RESPONSE_TYPES,
  validateComplexSurvey,
  validateFeedback,
  validateSimpleSurvey,
} from "./validate";

export interface ViewContext {
  client: ApiClient | null;
  settings: ConsoleSettings;
  storage: Storage;
  applySettings(next: ConsoleSettings): void;
}

export type Teardown = () => void;

export const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");

function messageOf(error: unknown): string {
  if (error instanceof ApiError) return error.message;
  if (error instanceof Error) return error.message || "request failed";
  return "request failed";
}

function note(root: HTMLElement, text: string, kind: "ok" | "err"): void {
  const box = root.querySelector<HTMLElement>(".notices");
  if (!box) return;
  const line = document.createElement("div");
  line.className = `notice ${kind}`;
  line.textContent = text;
  box.prepend(line);
  while (box.children.length > 6) box.removeChild(box.lastChild!);
}

function needClient(ctx: ViewContext, root: HTMLElement): ApiClient | null {
  if (!ctx.client) {
    root.innerHTML =
      '<p class="muted">Set the server address and API key under Settings first.</p>';
    return null;
  }
  return ctx.client;
}

// -- dashboard ---------------------------------------------------------------

export function mountDashboard(root: HTMLElement, ctx: ViewContext): Teardown {
  const state = initialDashboard();
  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel" id="health-panel"><h2>Server</h2><div id="health"></div></section>
    <section class="panel"><h2>Presence</h2><div class="stats" id="presence"></div></section>
    <section class="panel"><h2>Commands</h2><div id="categories"></div>
      <form id="quick" class="stack">
        <div class="row">
          <button data-cmd="ping" type="button">Ping</button>
          <button data-cmd="presence" type="button">Refresh presence</button>
          <span id="pong" class="muted"></span>
        </div>
        <div class="row">
          <input id="msg-channel" placeholder="channel id" />
          <input id="msg-text" placeholder="message text" />
          <button data-cmd="send" type="button">Send message</button>
        </div>
        <div class="row">
          <input id="role-member" placeholder="member id" />
          <input id="role-name" placeholder="role" />
          <button data-cmd="role" type="button">Give role</button>
        </div>
        <div class="row">
          <input id="clear-channel" placeholder="channel id" />
          <input id="clear-limit" placeholder="how many" type="number" min="1" />
          <button data-cmd="clear" type="button">Clear messages</button>
        </div>
      </form>
    </section>`;

  const categories = root.querySelector<HTMLElement>("#categories")!;
  categories.innerHTML = COMMAND_CATEGORIES.map(
    (cat) => `<div class="category"><span class="cat-label">${esc(cat.label)}</span>
      ${cat.actions.map((a) => `<a href="${a.href}">${esc(a.label)}</a>`).join(" ")}</div>`,
  ).join("");

  const redraw = () => {
    const health = root.querySelector<HTMLElement>("#health")!;
    if (state.reachable === null) {
      health.innerHTML = '<span class="muted">checking&hellip;</span>';
    } else if (!state.reachable) {
      health.innerHTML = '<span class="bad">Server Offline</span>';
    } else {
      const bots = state.bots.length
        ? state.bots.map((b) =>
            `<li>${esc(b.id)} ${esc(b.name)} <span class="muted">(${esc(b.state)}, ${esc(b.mode)})</span></li>`,
          ).join("")
        : '<li class="muted">no bots configured</li>';
      health.innerHTML = `<span class="good">Server Online</span>
        <span class="muted">checked ${esc(state.checkedAt)}</span>
        <ul class="plain">${bots}</ul>`;
    }
    root.querySelector<HTMLElement>("#presence")!.innerHTML = presencePanels(state.presence)
      .map((p) => `<div class="stat"><div class="value">${p.value}</div><div class="label">${p.label}</div></div>`)
      .join("");
    root.querySelectorAll<HTMLButtonElement>("#quick button").forEach((b) => {
      b.disabled = state.reachable === false || !ctx.client;
    });
  };
  redraw();

  const order = new LatestWins();
  const tick = async () => {
    if (!ctx.client) return;
    const ticket = order.begin();
    try {
      const health = await ctx.client.request<{
        uptime_s: number; bots: typeof state.bots; time: string;
      }>("health");
      if (!order.accept(ticket)) return;
      applyHealth(state, health.data!);
      try {
        const presence = await ctx.client.request<{
          online: number; offline: number; total: number;
        }>("presence");
        applyPresence(state, presence.data!);
      } catch {
        state.presence = null; // no running bot; header stays online
      }
    } catch {
      if (order.accept(ticket)) markUnreachable(state);
    }
    redraw();
  };
  const poller = startPolling(tick, ctx.settings.pollIntervalMs);

  root.querySelector("#quick")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const cmd = target.dataset["cmd"];
    if (!cmd) return;
    const client = needClient(ctx, root);
    if (!client) return;
    const val = (id: string) => root.querySelector<HTMLInputElement>(id)!.value;
    const run = async () => {
      try {
        if (cmd === "ping") {
          const env = await client.request<{ latency_ms: number }>("ping");
          root.querySelector("#pong")!.textContent = `${env.data!.latency_ms} ms`;
        } else if (cmd === "presence") {
          await tick();
        } else if (cmd === "send") {
          const env = await client.request("sendMessage", {
            body: { channel_id: val("#msg-channel"), text: val("#msg-text") },
          });
          note(root, env.message, "ok");
        } else if (cmd === "role") {
          const env = await client.request("giveRole", {
            body: { member_id: val("#role-member"), role: val("#role-name") },
          });
          note(root, env.message, "ok");
        } else if (cmd === "clear") {
          const env = await client.request("clearMessages", {
            body: {
              channel_id: val("#clear-channel"),
              limit: Number(val("#clear-limit")),
            },
          });
          note(root, env.message, "ok");
        }
      } catch (error) {
        note(root, messageOf(error), "err");
      }
    };
    void run();
  });

  return () => poller.stop();
}

// -- attendance ---------------------------------------------------------------

export function mountAttendance(root: HTMLElement, ctx: ViewContext): Teardown {
  const client = needClient(ctx, root);
  if (!client) return () => {};
  const live = new AttendanceLive(attendanceApi(client));

  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel"><h2>Attendance</h2>
      <form id="att-form" class="row">
        <input id="att-group" placeholder="group id" value="g1" />
        <input id="att-code" placeholder="4-digit code (blank = random)" maxlength="4" />
        <button id="att-start" type="submit">Start</button>
        <button id="att-stop" type="button" disabled>Stop</button>
      </form>
      <div id="att-live" class="bigstat hidden">
        <div class="value" id="att-count">0</div>
        <div class="label">checked in &middot; code <span id="att-code-show"></span></div>
      </div>
    </section>
    <section class="panel"><h2>Past sessions</h2><ul class="plain" id="att-history"></ul></section>`;

  const startBtn = root.querySelector<HTMLButtonElement>("#att-start")!;
  const stopBtn = root.querySelector<HTMLButtonElement>("#att-stop")!;
  const liveBox = root.querySelector<HTMLElement>("#att-live")!;

  const redraw = () => {
    root.querySelector("#att-count")!.textContent = String(live.present);
    root.querySelector("#att-code-show")!.textContent = live.code ?? "?";
    liveBox.classList.toggle("hidden", live.phase === "idle");
    startBtn.disabled = live.phase === "open";
    stopBtn.disabled = live.phase !== "open";
  };

  const history = async () => {
    try {
      const env = await client.request<{ sessions: Array<Record<string, unknown>> }>(
        "listSessions");
      root.querySelector("#att-history")!.innerHTML = env.data!.sessions
        .map((s) =>
          `<li>${esc(String(s["session_id"]))} group ${esc(String(s["group_id"]))}
           <strong>${String(s["present_count"])}</strong> present
           <span class="muted">(${esc(String(s["state"]))})</span></li>`)
        .join("") || '<li class="muted">none yet</li>';
    } catch (error) {
      note(root, messageOf(error), "err");
    }
  };
  void history();

  let poller: { stop(): void } | null = null;
  root.querySelector("#att-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const group = root.querySelector<HTMLInputElement>("#att-group")!.value;
    const code = root.querySelector<HTMLInputElement>("#att-code")!.value || undefined;
    const run = async () => {
      try {
        await live.start(group, code);
        note(root, live.lastMessage, "ok");
        poller = startPolling(() => live.poll(), ctx.settings.pollIntervalMs,
          (e) => note(root, messageOf(e), "err"));
      } catch (error) {
        note(root, messageOf(error), "err");
      }
      redraw();
    };
    void run();
  });
  stopBtn.addEventListener("click", () => {
    const group = root.querySelector<HTMLInputElement>("#att-group")!.value;
    const run = async () => {
      poller?.stop();
      poller = null;
      try {
        await live.stop(group);
        note(root, live.lastMessage, "ok");
        await history();
      } catch (error) {
        note(root, messageOf(error), "err");
      }
      redraw();
    };
    void run();
  });

  // keep the counter fresh even between poll ticks
  const repaint = setInterval(redraw, 250);
  redraw();
  return () => {
    poller?.stop();
    clearInterval(repaint);
  };
}

// -- surveys -------------------------------------------------------------------

interface SurveyRow {
  survey_id: string;
  title: string;
  kind: string;
  state: string;
}

export function mountSurveys(root: HTMLElement, ctx: ViewContext): Teardown {
  const client = needClient(ctx, root);
  if (!client) return () => {};

  const draft: ComplexSurveyDraft = {
    title: "", channelId: "", questions: [emptyQuestion()],
  };
  let selected: string | null = null;

  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel"><h2>New simple survey</h2>
      <form id="simple-form" class="row">
        <input id="sp-title" placeholder="title" />
        <input id="sp-prompt" placeholder="prompt" />
        <input id="sp-channel" placeholder="channel id" />
        <input id="sp-duration" placeholder="seconds (optional)" type="number" min="1" />
        <button type="submit">Post</button>
      </form>
    </section>
    <section class="panel"><h2>New complex survey</h2>
      <form id="complex-form" class="stack">
        <div class="row">
          <input id="cx-title" placeholder="title" />
          <input id="cx-channel" placeholder="channel id" />
          <input id="cx-duration" placeholder="seconds (optional)" type="number" min="1" />
        </div>
        <div id="cx-questions"></div>
        <div class="row">
          <button id="cx-add" type="button">Add question</button>
          <button type="submit">Post</button>
        </div>
      </form>
    </section>
    <section class="panel"><h2>Surveys</h2><ul class="plain" id="survey-list"></ul></section>
    <section class="panel hidden" id="results-panel"><h2>Results</h2><div id="results"></div></section>`;

  const questionRow = (q: QuestionDraft, i: number) => `
    <div class="row" data-q="${i}">
      <input class="q-prompt" placeholder="question ${i + 1}" value="${esc(q.prompt)}" />
      <select class="q-type">${RESPONSE_TYPES.map(
        (t) => `<option value="${t}"${t === q.responseType ? " selected" : ""}>${t}</option>`,
      ).join("")}</select>
      <button class="q-del" type="button" ${draft.questions.length === 1 ? "disabled" : ""}>&times;</button>
    </div>`;

  const drawQuestions = () => {
    root.querySelector("#cx-questions")!.innerHTML =
      draft.questions.map(questionRow).join("");
  };
  drawQuestions();

  const syncDraft = () => {
    draft.title = root.querySelector<HTMLInputElement>("#cx-title")!.value;
    draft.channelId = root.querySelector<HTMLInputElement>("#cx-channel")!.value;
    const seconds = root.querySelector<HTMLInputElement>("#cx-duration")!.value;
    draft.durationS = seconds ? Number(seconds) : undefined;
    root.querySelectorAll<HTMLElement>("#cx-questions [data-q]").forEach((row, i) => {
      const q = draft.questions[i]!;
      q.prompt = row.querySelector<HTMLInputElement>(".q-prompt")!.value;
      q.responseType = row.querySelector<HTMLSelectElement>(".q-type")!
        .value as QuestionDraft["responseType"];
    });
  };

  root.querySelector("#cx-add")!.addEventListener("click", () => {
    syncDraft();
    draft.questions.push(emptyQuestion());
    drawQuestions();
  });
  root.querySelector("#cx-questions")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (!target.classList.contains("q-del")) return;
    syncDraft();
    const index = Number(target.closest<HTMLElement>("[data-q]")!.dataset["q"]);
    draft.questions.splice(index, 1);
    drawQuestions();
  });

  const refreshList = async () => {
    try {
      const env = await client.request<{ surveys: SurveyRow[] }>("listSurveys");
      root.querySelector("#survey-list")!.innerHTML = env.data!.surveys
        .map((s) =>
          `<li><a href="#" data-sid="${esc(s.survey_id)}">${esc(s.survey_id)}</a>
           ${esc(s.title)} <span class="muted">(${esc(s.kind)}, ${esc(s.state)})</span></li>`)
        .join("") || '<li class="muted">none yet</li>';
    } catch (error) {
      note(root, messageOf(error), "err");
    }
  };
  void refreshList();

  root.querySelector("#simple-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const val = (id: string) => root.querySelector<HTMLInputElement>(id)!.value;
    const body = simpleSurveyBody({
      title: val("#sp-title"), prompt: val("#sp-prompt"),
      channelId: val("#sp-channel"),
      durationS: val("#sp-duration") ? Number(val("#sp-duration")) : undefined,
    });
    const problems = validateSimpleSurvey(body);
    if (problems.length) {
      problems.forEach((p) => note(root, p, "err"));
      return;
    }
    client.request("createSimpleSurvey", { body })
      .then((env) => { note(root, env.message, "ok"); return refreshList(); })
      .catch((error) => note(root, messageOf(error), "err"));
  });

  root.querySelector("#complex-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    syncDraft();
    const body = complexSurveyBody(draft);
    const problems = validateComplexSurvey(body);
    if (problems.length) {
      problems.forEach((p) => note(root, p, "err"));
      return;
    }
    client.request("createComplexSurvey", { body })
      .then((env) => { note(root, env.message, "ok"); return refreshList(); })
      .catch((error) => note(root, messageOf(error), "err"));
  });

  interface ResultsData {
    title: string;
    participants: number;
    questions: Array<{
      prompt: string;
      histogram: { buckets: Array<{ label: string; count: number }> };
    }>;
  }
  const order = new LatestWins();
  const drawResults = async () => {
    if (!selected) return;
    const ticket = order.begin();
    const env = await client.request<ResultsData>("surveyResults", { id: selected });
    if (!order.accept(ticket)) return;
    const data = env.data!;
    root.querySelector("#results")!.innerHTML =
      `<p>${esc(data.title)} <span class="muted">${data.participants} participants</span></p>` +
      data.questions.map((q) => renderHistogram(q.histogram.buckets, q.prompt)).join("");
  };
  const poller = startPolling(
    () => drawResults(), ctx.settings.pollIntervalMs,
    (e) => note(root, messageOf(e), "err"));

  root.querySelector("#survey-list")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const sid = target.dataset["sid"];
    if (!sid) return;
    event.preventDefault();
    selected = sid;
    root.querySelector("#results-panel")!.classList.remove("hidden");
    drawResults().catch((error) => note(root, messageOf(error), "err"));
  });

  return () => poller.stop();
}

// -- feedback ------------------------------------------------------------------

export function mountFeedback(root: HTMLElement, ctx: ViewContext): Teardown {
  const client = needClient(ctx, root);
  if (!client) return () => {};
  let selected: string | null = null;

  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel"><h2>Start a feedback round</h2>
      <form id="fb-form" class="row">
        <input id="fb-label" placeholder="label (e.g. today's lecture)" />
        <input id="fb-channel" placeholder="channel id" />
        <button type="submit">Start</button>
      </form>
    </section>
    <section class="panel"><h2>Rounds</h2><ul class="plain" id="fb-list"></ul></section>
    <section class="panel hidden" id="fb-results-panel"><h2>Results</h2><div id="fb-results"></div></section>`;

  const refresh = async () => {
    try {
      const env = await client.request<{ feedback: Array<Record<string, string>> }>(
        "listFeedback");
      root.querySelector("#fb-list")!.innerHTML = env.data!.feedback
        .map((f) =>
          `<li><a href="#" data-fid="${esc(f["feedback_id"] ?? "")}">${esc(f["feedback_id"] ?? "")}</a>
           ${esc(f["label"] ?? "")} <span class="muted">(${esc(f["state"] ?? "")})</span></li>`)
        .join("") || '<li class="muted">none yet</li>';
    } catch (error) {
      note(root, messageOf(error), "err");
    }
  };
  void refresh();

  root.querySelector("#fb-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const body = {
      label: root.querySelector<HTMLInputElement>("#fb-label")!.value,
      channel_id: root.querySelector<HTMLInputElement>("#fb-channel")!.value,
    };
    const problems = validateFeedback(body);
    if (problems.length) {
      problems.forEach((p) => note(root, p, "err"));
      return;
    }
    client.request("startFeedback", { body })
      .then((env) => { note(root, env.message, "ok"); return refresh(); })
      .catch((error) => note(root, messageOf(error), "err"));
  });

  interface FeedbackResults {
    label: string;
    histogram: { buckets: Array<{ label: string; count: number }> };
    comments: Array<{ student_id: string; text: string }>;
  }
  const order = new LatestWins();
  const drawResults = async () => {
    if (!selected) return;
    const ticket = order.begin();
    const env = await client.request<FeedbackResults>("feedbackResults", { id: selected });
    if (!order.accept(ticket)) return;
    const data = env.data!;
    root.querySelector("#fb-results")!.innerHTML =
      renderHistogram(data.histogram.buckets, data.label) +
      (data.comments.length
        ? `<ul class="plain">${data.comments.map(
            (c) => `<li><span class="muted">${esc(c.student_id)}:</span> ${esc(c.text)}</li>`,
          ).join("")}</ul>`
        : '<p class="muted">no comments</p>');
  };
  const poller = startPolling(
    () => drawResults(), ctx.settings.pollIntervalMs,
    (e) => note(root, messageOf(e), "err"));

  root.querySelector("#fb-list")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const fid = target.dataset["fid"];
    if (!fid) return;
    event.preventDefault();
    selected = fid;
    root.querySelector("#fb-results-panel")!.classList.remove("hidden");
    drawResults().catch((error) => note(root, messageOf(error), "err"));
  });

  return () => poller.stop();
}

// -- bots ----------------------------------------------------------------------

export function mountBots(root: HTMLElement, ctx: ViewContext): Teardown {
  const client = needClient(ctx, root);
  if (!client) return () => {};

  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel"><h2>Bots</h2><ul class="plain" id="bot-list"></ul></section>
    <section class="panel"><h2>New bot</h2>
      <form id="bot-form" class="stack">
        <div class="row">
          <input id="bot-name" placeholder="name" />
          <input id="bot-guild" placeholder="guild id" />
          <input id="bot-token" placeholder="platform token" type="password" />
        </div>
        <div class="row">
          <input id="bot-group" placeholder="group id" value="g1" />
          <input id="bot-channel" placeholder="channel id" />
          <input id="bot-roster" placeholder="roster: comma-separated member ids" />
        </div>
        <button type="submit">Create</button>
      </form>
    </section>`;

  const refresh = async () => {
    try {
      const env = await client.request<{ bots: Array<Record<string, string>> }>("listBots");
      root.querySelector("#bot-list")!.innerHTML = env.data!.bots
        .map((b) => {
          const id = esc(b["id"] ?? "");
          return `<li><strong>${id}</strong> ${esc(b["name"] ?? "")}
            <span class="muted">(${esc(b["state"] ?? "")}, ${esc(b["mode"] ?? "")})</span>
            <button data-act="start" data-id="${id}">Start</button>
            <button data-act="stop" data-id="${id}">Stop</button>
            <button data-act="delete" data-id="${id}">Delete</button></li>`;
        })
        .join("") || '<li class="muted">none yet</li>';
    } catch (error) {
      note(root, messageOf(error), "err");
    }
  };
  void refresh();

  root.querySelector("#bot-list")!.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const act = target.dataset["act"];
    const id = target.dataset["id"];
    if (!act || !id) return;
    const name = act === "start" ? "startBot" : act === "stop" ? "stopBot" : "deleteBot";
    client.request(name, { id })
      .then((env) => { note(root, env.message, "ok"); return refresh(); })
      .catch((error) => note(root, messageOf(error), "err"));
  });

  root.querySelector("#bot-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const val = (id: string) => root.querySelector<HTMLInputElement>(id)!.value;
    const roster = val("#bot-roster").split(",").map((s) => s.trim()).filter(Boolean);
    const body = {
      name: val("#bot-name"),
      guild_id: val("#bot-guild"),
      token: val("#bot-token"),
      groups: [{ id: val("#bot-group"), channel_id: val("#bot-channel"), roster }],
    };
    client.request("createBot", { body })
      .then((env) => { note(root, env.message, "ok"); return refresh(); })
      .catch((error) => note(root, messageOf(error), "err"));
  });

  return () => {};
}

// -- settings ------------------------------------------------------------------

export function mountSettings(root: HTMLElement, ctx: ViewContext): Teardown {
  root.innerHTML = `
    <div class="notices"></div>
    <section class="panel"><h2>Settings</h2>
      <form id="settings-form" class="stack">
        <label>Server URL <input id="set-url" value="${esc(ctx.settings.serverUrl)}" /></label>
        <label>API key <input id="set-key" type="password" placeholder="${esc(maskKey(ctx.settings.apiKey))}" /></label>
        <label>Poll interval (ms) <input id="set-poll" type="number" min="250" value="${ctx.settings.pollIntervalMs}" /></label>
        <div class="row">
          <button type="submit">Save</button>
          <button id="logout" type="button">Log out</button>
        </div>
      </form>
    </section>`;

  root.querySelector("#settings-form")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const key = root.querySelector<HTMLInputElement>("#set-key")!.value;
    const next = {
      serverUrl: root.querySelector<HTMLInputElement>("#set-url")!.value,
      apiKey: key || ctx.settings.apiKey, // blank input keeps the stored key
      pollIntervalMs:
        Number(root.querySelector<HTMLInputElement>("#set-poll")!.value) || 1000,
    };
    saveSettings(ctx.storage, next);
    ctx.applySettings(next);
    note(root, "Saved.", "ok");
    root.querySelector<HTMLInputElement>("#set-key")!.value = "";
    root.querySelector<HTMLInputElement>("#set-key")!.placeholder = maskKey(next.apiKey);
  });

  root.querySelector("#logout")!.addEventListener("click", () => {
    const next = clearApiKey(ctx.storage, ctx.settings);
    ctx.applySettings(next);
    note(root, "Credential cleared.", "ok");
    root.querySelector<HTMLInputElement>("#set-key")!.placeholder = maskKey("");
  });

  return () => {};
}
