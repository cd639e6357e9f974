// Typed client for the session service; every UI action maps to one call here.

export type InteractionKind = 'question' | 'approval' | 'validation';

export interface PendingQuestion {
  text: string;
}

export interface PendingApproval {
  script: string;
  attempt: number;
}

export interface PendingValidation {
  round: number;
  message: string;
  views: Record<string, string>;
  script: string;
  model: string;
  sketches: string[];
}

export interface PendingInteraction {
  kind: InteractionKind;
  payload: PendingQuestion | PendingApproval | PendingValidation;
}

export interface SessionView {
  id: string;
  phase: string;
  pending_interaction: PendingInteraction | null;
  artifact_refs: string[];
  error: string | null;
}

export type SessionMode = 'team' | 'zero-shot';

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = 'ApiError';
  }
}

async function raiseForStatus(response: Response, action: string): Promise<void> {
  if (response.ok) {
    return;
  }
  let detail = '';
  try {
    const body = (await response.json()) as { detail?: unknown };
    detail = typeof body.detail === 'string' ? body.detail : JSON.stringify(body.detail);
  } catch {
    detail = response.statusText;
  }
  throw new ApiError(`${action} failed (${response.status}): ${detail}`, response.status);
}

export class ApiClient {
  constructor(private readonly base: string = '') {}

  async createSession(text: string, mode: SessionMode, sketches: File[] = []): Promise<string> {
    const form = new FormData();
    form.set('text', text);
    form.set('mode', mode);
    for (const sketch of sketches) {
      form.append('sketches', sketch, sketch.name);
    }
    const response = await fetch(`${this.base}/sessions`, { method: 'POST', body: form });
    await raiseForStatus(response, 'create session');
    const body = (await response.json()) as { id: string };
    return body.id;
  }

  async getSession(id: string): Promise<SessionView> {
    const response = await fetch(`${this.base}/sessions/${id}`);
    await raiseForStatus(response, 'poll session');
    return (await response.json()) as SessionView;
  }

  async postReply(id: string, text: string): Promise<void> {
    const response = await fetch(`${this.base}/sessions/${id}/reply`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text }),
    });
    await raiseForStatus(response, 'send reply');
  }

  async postApproval(id: string, approved: boolean): Promise<void> {
    const response = await fetch(`${this.base}/sessions/${id}/approve`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ approved }),
    });
    await raiseForStatus(response, 'send approval');
  }

  artifactUrl(id: string, path: string): string {
    return `${this.base}/sessions/${id}/artifacts/${path}`;
  }
}
