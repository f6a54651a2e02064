// Survey builder form state and its mapping to REST bodies. The form model
// uses camelCase and friendly optionals; toBody() produces exactly what the
// server expects, and the result is validated (validate.ts) before POSTing.

import { RESPONSE_TYPES, type ResponseTypeName } from "./validate";

export interface QuestionDraft {
  prompt: string;
  responseType: ResponseTypeName;
}

export interface SimpleSurveyDraft {
  title: string;
  prompt: string;
  channelId: string;
  durationS?: number;
}

export interface ComplexSurveyDraft {
  title: string;
  channelId: string;
  questions: QuestionDraft[];
  durationS?: number;
}

export function emptyQuestion(): QuestionDraft {
  return { prompt: "", responseType: RESPONSE_TYPES[0] };
}

export function simpleSurveyBody(draft: SimpleSurveyDraft): Record<string, unknown> {
  const body: Record<string, unknown> = {
    title: draft.title,
    prompt: draft.prompt,
    channel_id: draft.channelId,
  };
  if (draft.durationS !== undefined) body["duration_s"] = draft.durationS;
  return body;
}

export function complexSurveyBody(draft: ComplexSurveyDraft): Record<string, unknown> {
  const body: Record<string, unknown> = {
    title: draft.title,
    channel_id: draft.channelId,
    questions: draft.questions.map((q) => ({
      prompt: q.prompt,
      response_type: q.responseType,
    })),
  };
  if (draft.durationS !== undefined) body["duration_s"] = draft.durationS;
  return body;
}
