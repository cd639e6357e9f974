// Session panel wiring: one create form, a polling loop, and the three
// interaction panels. All pipeline state comes from the server on each poll.

import { ApiClient, type PendingApproval, type PendingQuestion, type PendingValidation, type SessionView } from './api.js';
import {
  renderApprovalPanel,
  renderChatLog,
  renderCreateForm,
  renderNotice,
  renderQuestionForm,
  renderValidationPanel,
} from './render.js';
import { SessionTracker, isTerminal } from './state.js';

export interface AppOptions {
  /** Base polling interval; doubles on errors up to maxPollMs. */
  pollMs?: number;
  maxPollMs?: number;
  /** Confirmation hook for Accept; defaults to window.confirm. */
  confirmAccept?: (message: string) => boolean;
}

export interface AppHandle {
  sessionId(): string | null;
  stop(): void;
}

export function mount(root: HTMLElement, client: ApiClient, options: AppOptions = {}): AppHandle {
  const pollMs = options.pollMs ?? 500;
  const maxPollMs = options.maxPollMs ?? 5000;
  const confirmAccept =
    options.confirmAccept ?? ((message: string) => window.confirm(message));

  root.innerHTML = `
    <div id="create-area">${renderCreateForm()}</div>
    <div id="notice-area"></div>
    <div id="phase-area" data-phase=""></div>
    <div id="chat-area"></div>
    <div id="interaction-area"></div>
  `;
  const createArea = root.querySelector<HTMLElement>('#create-area')!;
  const noticeArea = root.querySelector<HTMLElement>('#notice-area')!;
  const phaseArea = root.querySelector<HTMLElement>('#phase-area')!;
  const chatArea = root.querySelector<HTMLElement>('#chat-area')!;
  const interactionArea = root.querySelector<HTMLElement>('#interaction-area')!;

  const tracker = new SessionTracker();
  let sessionId: string | null = null;
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;
  let delay = pollMs;
  let renderedInteraction = '';

  const toUrl = (path: string): string => client.artifactUrl(sessionId!, path);

  function notice(message: string): void {
    noticeArea.innerHTML = message ? renderNotice(message) : '';
  }

  function renderChat(): void {
    chatArea.innerHTML = renderChatLog(tracker.entries, toUrl);
  }

  async function act(label: string, call: () => Promise<void>): Promise<void> {
    try {
      await call();
      tracker.recordUserAction(label);
      renderChat();
      notice('');
      await poll();
    } catch (error) {
      notice(error instanceof Error ? error.message : String(error));
    }
  }

  function wireQuestion(): void {
    const form = interactionArea.querySelector<HTMLFormElement>('#answer-form')!;
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = interactionArea.querySelector<HTMLInputElement>('#answer-input')!;
      void act(input.value, () => client.postReply(sessionId!, input.value));
    });
  }

  function wireApproval(): void {
    interactionArea.querySelector('#approve-button')!.addEventListener('click', () => {
      void act('approved execution', () => client.postApproval(sessionId!, true));
    });
    interactionArea.querySelector('#deny-button')!.addEventListener('click', () => {
      void act('denied execution', () => client.postApproval(sessionId!, false));
    });
  }

  function wireValidation(): void {
    const form = interactionArea.querySelector<HTMLFormElement>('#feedback-form')!;
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      const input = interactionArea.querySelector<HTMLTextAreaElement>('#feedback-input')!;
      const text = input.value.trim();
      if (!text) {
        notice('Enter feedback, or use Accept to finish.');
        return;
      }
      void act(text, () => client.postReply(sessionId!, text));
    });
    interactionArea.querySelector('#accept-button')!.addEventListener('click', () => {
      if (!confirmAccept('Accept the model and finish the session?')) {
        return;
      }
      void act('accept', () => client.postReply(sessionId!, ''));
    });
  }

  function renderInteraction(view: SessionView): void {
    const pending = view.pending_interaction;
    const key = pending === null ? '' : `${pending.kind}:${JSON.stringify(pending.payload)}`;
    if (key === renderedInteraction) {
      return; // keep focus and typed text between polls
    }
    renderedInteraction = key;
    if (pending === null) {
      interactionArea.innerHTML = '';
      return;
    }
    if (pending.kind === 'question') {
      interactionArea.innerHTML = renderQuestionForm((pending.payload as PendingQuestion).text);
      wireQuestion();
    } else if (pending.kind === 'approval') {
      interactionArea.innerHTML = renderApprovalPanel(pending.payload as PendingApproval);
      wireApproval();
    } else {
      interactionArea.innerHTML = renderValidationPanel(
        pending.payload as PendingValidation,
        toUrl,
      );
      wireValidation();
    }
  }

  async function poll(): Promise<void> {
    if (timer !== null) {
      clearTimeout(timer); // an action-triggered poll supersedes the scheduled one
      timer = null;
    }
    if (stopped || sessionId === null) {
      return;
    }
    try {
      const view = await client.getSession(sessionId);
      delay = pollMs;
      tracker.absorb(view);
      phaseArea.dataset.phase = view.phase;
      phaseArea.textContent = view.error ? `${view.phase}: ${view.error}` : view.phase;
      renderChat();
      renderInteraction(view);
      if (isTerminal(view.phase)) {
        return;
      }
    } catch (error) {
      notice(`${error instanceof Error ? error.message : String(error)} - retrying`);
      delay = Math.min(delay * 2, maxPollMs);
    }
    timer = setTimeout(() => void poll(), delay);
  }

  createArea.querySelector<HTMLFormElement>('#create-form')!.addEventListener('submit', (event) => {
    event.preventDefault();
    const text = createArea.querySelector<HTMLTextAreaElement>('#spec-text')!.value;
    const mode = createArea.querySelector<HTMLSelectElement>('#mode-select')!.value as
      | 'team'
      | 'zero-shot';
    const files = Array.from(
      createArea.querySelector<HTMLInputElement>('#sketch-input')!.files ?? [],
    );
    void (async () => {
      try {
        sessionId = await client.createSession(text, mode, files);
        createArea.innerHTML = `<div class="session-id">Session ${sessionId}</div>`;
        notice('');
        await poll();
      } catch (error) {
        notice(error instanceof Error ? error.message : String(error));
      }
    })();
  });

  return {
    sessionId: () => sessionId,
    stop: () => {
      stopped = true;
      if (timer !== null) {
        clearTimeout(timer);
      }
    },
  };
}

export { ApiClient };
