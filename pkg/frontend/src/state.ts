// Chat history derivation: successive polls of one session become chat entries.
// Nothing here is authoritative - the pipeline state always comes from the server.

import type {
  PendingApproval,
  PendingQuestion,
  PendingValidation,
  SessionView,
} from './api.js';

export type Author = 'system' | 'agent' | 'user';

export type EntryKind = 'question' | 'answer' | 'approval_request' | 'validation_request' | 'status';

export interface ChatEntry {
  author: Author;
  kind: EntryKind;
  text: string;
  attachments: string[];
}

/** The order the seven views are rendered and labeled in. */
export const VIEW_LABELS = ['top', 'bottom', 'right', 'left', 'front', 'back', 'isometric'] as const;

export const TERMINAL_PHASES = ['DONE', 'FAILED'] as const;

export function isTerminal(phase: string): boolean {
  return (TERMINAL_PHASES as readonly string[]).includes(phase);
}

function interactionKey(view: SessionView): string {
  const pending = view.pending_interaction;
  if (pending === null) {
    return '';
  }
  if (pending.kind === 'question') {
    return `question:${(pending.payload as PendingQuestion).text}`;
  }
  if (pending.kind === 'approval') {
    return `approval:${(pending.payload as PendingApproval).attempt}`;
  }
  return `validation:${(pending.payload as PendingValidation).round}`;
}

function interactionEntry(view: SessionView): ChatEntry {
  const pending = view.pending_interaction!;
  if (pending.kind === 'question') {
    return {
      author: 'agent',
      kind: 'question',
      text: (pending.payload as PendingQuestion).text,
      attachments: [],
    };
  }
  if (pending.kind === 'approval') {
    const payload = pending.payload as PendingApproval;
    return {
      author: 'agent',
      kind: 'approval_request',
      text: `The generated script (attempt ${payload.attempt}) is ready to execute.`,
      attachments: [],
    };
  }
  const payload = pending.payload as PendingValidation;
  const views = VIEW_LABELS.filter((label) => label in payload.views).map(
    (label) => payload.views[label],
  );
  return {
    author: 'agent',
    kind: 'validation_request',
    text: payload.message,
    attachments: [...views, ...payload.sketches, payload.model],
  };
}

/**
 * Accumulates chat entries across polls. Each phase change, new pending
 * interaction, and terminal outcome appends exactly one entry.
 */
export class SessionTracker {
  readonly entries: ChatEntry[] = [];
  private phase = '';
  private lastInteraction = '';

  absorb(view: SessionView): ChatEntry[] {
    if (view.phase !== this.phase) {
      this.phase = view.phase;
      const text = isTerminal(view.phase)
        ? view.phase === 'DONE'
          ? 'Session complete - the model was accepted.'
          : `Session failed: ${view.error ?? 'unknown error'}`
        : `Phase: ${view.phase}`;
      this.entries.push({ author: 'system', kind: 'status', text, attachments: [] });
    }
    const key = interactionKey(view);
    if (key !== '' && key !== this.lastInteraction) {
      this.lastInteraction = key;
      this.entries.push(interactionEntry(view));
    }
    return this.entries;
  }

  /** Record what the user just did so the transcript reads as a dialogue. */
  recordUserAction(text: string): ChatEntry[] {
    this.entries.push({ author: 'user', kind: 'answer', text, attachments: [] });
    return this.entries;
  }
}
