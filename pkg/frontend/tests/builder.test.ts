// The builder's POST bodies must pass the client-side mirror of the
// server's validation for all three response types, and an unknown type
// must be rejected before it ever reaches the network.

import { describe, expect, it } from "vitest";

import { complexSurveyBody, simpleSurveyBody } from "../src/builder";
import {
  RESPONSE_TYPES,
  validateComplexSurvey,
  validateFeedback,
  validateSimpleSurvey,
} from "../src/validate";

describe("survey builder bodies", () => {
  it("offers exactly the three response types", () => {
    expect([...RESPONSE_TYPES]).toEqual(["five_level", "percentage", "free_text"]);
  });

  it("builds a simple-survey body the server accepts", () => {
    const body = simpleSurveyBody({
      title: "week 3", prompt: "pace?", channelId: "general", durationS: 600,
    });
    expect(body).toEqual({
      title: "week 3", prompt: "pace?", channel_id: "general", duration_s: 600,
    });
    expect(validateSimpleSurvey(body)).toEqual([]);
  });

  it("builds a complex-survey body covering all three types", () => {
    const body = complexSurveyBody({
      title: "unit check",
      channelId: "general",
      questions: [
        { prompt: "difficulty?", responseType: "five_level" },
        { prompt: "how much did you follow?", responseType: "percentage" },
        { prompt: "anything else?", responseType: "free_text" },
      ],
    });
    expect(body["questions"]).toEqual([
      { prompt: "difficulty?", response_type: "five_level" },
      { prompt: "how much did you follow?", response_type: "percentage" },
      { prompt: "anything else?", response_type: "free_text" },
    ]);
    expect(validateComplexSurvey(body)).toEqual([]);
  });

  it("rejects an unknown response type client-side", () => {
    const body = {
      title: "t", channel_id: "general",
      questions: [{ prompt: "pick one", response_type: "multiple_choice" }],
    };
    const problems = validateComplexSurvey(body);
    expect(problems).toHaveLength(1);
    expect(problems[0]).toContain("five_level, percentage, free_text");
  });
});

describe("validation mirrors the server's 400 rules", () => {
  const accepted: Array<[string, Record<string, unknown>]> = [
    ["whitespace prompt is a non-empty string", {
      title: "t", channel_id: "c",
      questions: [{ prompt: "  ", response_type: "free_text" }],
    }],
    ["empty options list means defaults", {
      title: "t", channel_id: "c",
      questions: [{ prompt: "q", response_type: "five_level", options: [] }],
    }],
    ["exactly five custom labels", {
      title: "t", channel_id: "c",
      questions: [{
        prompt: "q", response_type: "five_level",
        options: ["a", "b", "c", "d", "e"],
      }],
    }],
    ["duration omitted", {
      title: "t", channel_id: "c",
      questions: [{ prompt: "q", response_type: "percentage" }],
    }],
  ];
  it.each(accepted)("accepts: %s", (_name, body) => {
    expect(validateComplexSurvey(body)).toEqual([]);
  });

  const rejected: Array<[string, Record<string, unknown>]> = [
    ["missing title", {
      channel_id: "c", questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["empty title", {
      title: "", channel_id: "c",
      questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["missing questions", { title: "t", channel_id: "c" }],
    ["empty questions", { title: "t", channel_id: "c", questions: [] }],
    ["question not an object", { title: "t", channel_id: "c", questions: ["q"] }],
    ["question missing prompt", {
      title: "t", channel_id: "c", questions: [{ response_type: "free_text" }],
    }],
    ["negative duration", {
      title: "t", channel_id: "c", duration_s: -5,
      questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["zero duration", {
      title: "t", channel_id: "c", duration_s: 0,
      questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["fractional duration", {
      title: "t", channel_id: "c", duration_s: 1.5,
      questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["boolean duration", {
      title: "t", channel_id: "c", duration_s: true,
      questions: [{ prompt: "q", response_type: "free_text" }],
    }],
    ["four option labels", {
      title: "t", channel_id: "c",
      questions: [{
        prompt: "q", response_type: "five_level", options: ["a", "b", "c", "d"],
      }],
    }],
    ["options on a percentage question", {
      title: "t", channel_id: "c",
      questions: [{ prompt: "q", response_type: "percentage", options: ["a"] }],
    }],
  ];
  it.each(rejected)("rejects: %s", (_name, body) => {
    expect(validateComplexSurvey(body).length).toBeGreaterThan(0);
  });

  it("checks the simple survey form the same way", () => {
    expect(validateSimpleSurvey({ title: "t", prompt: "p", channel_id: "c" }))
      .toEqual([]);
    expect(validateSimpleSurvey({ title: "t", prompt: "", channel_id: "c" }))
      .toContain("'prompt' must be a non-empty string");
    expect(validateSimpleSurvey({ title: "t", prompt: "p", channel_id: "c", duration_s: "5" }))
      .toContain("'duration_s' must be a positive integer");
  });

  it("checks feedback bodies", () => {
    expect(validateFeedback({ label: "today", channel_id: "c" })).toEqual([]);
    expect(validateFeedback({ label: "", channel_id: "c" })).toHaveLength(1);
    expect(validateFeedback({ label: "today" })).toHaveLength(1);
  });
});
