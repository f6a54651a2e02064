// Client-side mirror of the server's 400 rules for instructor-built
// payloads. The point is to reject a body if and only if the server would:
// stricter checks would block inputs the server accepts, looser ones would
// round-trip to an error the form could have caught. Kept in lockstep with
// the REST service's body validation.

export const RESPONSE_TYPES = ["five_level", "percentage", "free_text"] as const;
export type ResponseTypeName = (typeof RESPONSE_TYPES)[number];

function needStr(body: Record<string, unknown>, key: string, errors: string[]): void {
  const value = body[key];
  // the server takes any non-empty string, including all-whitespace
  if (typeof value !== "string" || value.length === 0) {
    errors.push(`'${key}' must be a non-empty string`);
  }
}

function optPositiveInt(body: Record<string, unknown>, key: string, errors: string[]): void {
  const value = body[key];
  if (value === undefined || value === null) return;
  if (typeof value !== "number" || !Number.isInteger(value) || value <= 0) {
    errors.push(`'${key}' must be a positive integer`);
  }
}

function checkOptions(
  question: Record<string, unknown>,
  index: number,
  errors: string[],
): void {
  const options = question["options"];
  if (options === undefined) return;
  if (!Array.isArray(options)) {
    errors.push(`question ${index}: 'options' must be a list`);
    return;
  }
  if (options.length === 0) return; // empty means server defaults
  if (question["response_type"] === "five_level") {
    if (options.length !== 5) {
      errors.push(`question ${index}: five_level questions need exactly 5 option labels`);
    }
  } else {
    errors.push(`question ${index}: only five_level questions take options`);
  }
}

/** Body for POST /api/surveys/simple. Empty result means the server accepts it. */
export function validateSimpleSurvey(body: Record<string, unknown>): string[] {
  const errors: string[] = [];
  needStr(body, "title", errors);
  needStr(body, "prompt", errors);
  needStr(body, "channel_id", errors);
  optPositiveInt(body, "duration_s", errors);
  checkOptions({ ...body, response_type: "five_level" }, 0, errors);
  return errors;
}

/** Body for POST /api/surveys/complex. */
export function validateComplexSurvey(body: Record<string, unknown>): string[] {
  const errors: string[] = [];
  needStr(body, "title", errors);
  needStr(body, "channel_id", errors);
  optPositiveInt(body, "duration_s", errors);
  const questions = body["questions"];
  if (!Array.isArray(questions) || questions.length === 0) {
    errors.push("'questions' must be a non-empty list");
    return errors;
  }
  questions.forEach((question, index) => {
    if (typeof question !== "object" || question === null || Array.isArray(question)) {
      errors.push(`question ${index} must be an object`);
      return;
    }
    const q = question as Record<string, unknown>;
    needStr(q, "prompt", errors);
    needStr(q, "response_type", errors);
    const rt = q["response_type"];
    if (typeof rt === "string" && rt.length > 0
        && !RESPONSE_TYPES.includes(rt as ResponseTypeName)) {
      errors.push(
        `question ${index}: response_type must be one of ${RESPONSE_TYPES.join(", ")}`);
    }
    checkOptions(q, index, errors);
  });
  return errors;
}

/** Body for POST /api/feedback. */
export function validateFeedback(body: Record<string, unknown>): string[] {
  const errors: string[] = [];
  needStr(body, "label", errors);
  needStr(body, "channel_id", errors);
  return errors;
}
