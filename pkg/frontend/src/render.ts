// HTML renderers: pure functions from polled state to markup strings.

import type { PendingApproval, PendingValidation } from './api.js';
import { VIEW_LABELS, type ChatEntry } from './state.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderCreateForm(): string {
  return `<form id="create-form" class="create-form">
    <label>Describe the part
      <textarea id="spec-text" name="text" rows="4" placeholder="e.g. a 10 x 10 x 2 cm block with two through-holes"></textarea>
    </label>
    <label>Sketches (optional)
      <input id="sketch-input" type="file" accept="image/png,image/jpeg" multiple />
    </label>
    <label>Mode
      <select id="mode-select">
        <option value="team" selected>team</option>
        <option value="zero-shot">zero-shot</option>
      </select>
    </label>
    <button id="create-button" type="submit">Start session</button>
  </form>`;
}

export function renderChatLog(entries: ChatEntry[], toUrl: (path: string) => string): string {
  if (entries.length === 0) {
    return `<div class="chat-empty">No activity yet.</div>`;
  }
  const items = entries
    .map((entry) => {
      const attachments = entry.attachments
        .map((path) =>
          path.endsWith('.png')
            ? `<img class="attachment" src="${escapeHtml(toUrl(path))}" alt="${escapeHtml(path)}" />`
            : `<a class="attachment" href="${escapeHtml(toUrl(path))}">${escapeHtml(path)}</a>`,
        )
        .join('');
      return `<li class="entry entry-${entry.author} entry-${entry.kind}">
        <span class="author">${entry.author}</span>
        <span class="text">${escapeHtml(entry.text)}</span>
        ${attachments}
      </li>`;
    })
    .join('');
  return `<ul class="chat-log">${items}</ul>`;
}

export function renderQuestionForm(question: string): string {
  return `<div class="panel panel-question">
    <p class="question-text">${escapeHtml(question)}</p>
    <form id="answer-form">
      <input id="answer-input" type="text" placeholder="Your answer" />
      <button id="answer-button" type="submit">Send answer</button>
    </form>
  </div>`;
}

export function renderApprovalPanel(payload: PendingApproval): string {
  return `<div class="panel panel-approval">
    <p>Attempt ${payload.attempt} wants to execute this script:</p>
    <pre class="script">${escapeHtml(payload.script)}</pre>
    <button id="approve-button" type="button">Approve execution</button>
    <button id="deny-button" type="button">Deny</button>
  </div>`;
}

export function renderValidationPanel(
  payload: PendingValidation,
  toUrl: (path: string) => string,
): string {
  const figures = VIEW_LABELS.map((label) => {
    const path = payload.views[label];
    return `<figure class="view">
      <img src="${escapeHtml(toUrl(path))}" alt="${label} view" />
      <figcaption>${label}</figcaption>
    </figure>`;
  }).join('');
  const sketches = payload.sketches
    .map(
      (path) => `<figure class="sketch">
      <img src="${escapeHtml(toUrl(path))}" alt="input sketch" />
      <figcaption>sketch</figcaption>
    </figure>`,
    )
    .join('');
  return `<div class="panel panel-validation">
    <p class="validation-message">${escapeHtml(payload.message)}</p>
    <div class="view-grid">${figures}</div>
    ${sketches ? `<div class="sketch-strip">${sketches}</div>` : ''}
    <p><a id="model-link" href="${escapeHtml(toUrl(payload.model))}">Download ${escapeHtml(payload.model)}</a></p>
    <details class="script-details"><summary>Generated script</summary><pre>${escapeHtml(payload.script)}</pre></details>
    <form id="feedback-form">
      <textarea id="feedback-input" rows="2" placeholder="What should change?"></textarea>
      <button id="feedback-button" type="submit">Send feedback</button>
      <button id="accept-button" type="button">Accept model</button>
    </form>
  </div>`;
}

export function renderNotice(message: string): string {
  return `<div class="notice" role="alert">${escapeHtml(message)}</div>`;
}
