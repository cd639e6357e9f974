import { describe, expect, it } from 'vitest';

import type { SessionView } from '../src/api.js';
import { SessionTracker, VIEW_LABELS, isTerminal } from '../src/state.js';

function view(overrides: Partial<SessionView> = {}): SessionView {
  return {
    id: 's1',
    phase: 'CLARIFYING',
    pending_interaction: null,
    artifact_refs: [],
    error: null,
    ...overrides,
  };
}

describe('isTerminal', () => {
  it('treats only DONE and FAILED as terminal', () => {
    expect(isTerminal('DONE')).toBe(true);
    expect(isTerminal('FAILED')).toBe(true);
    expect(isTerminal('VALIDATING')).toBe(false);
    expect(isTerminal('')).toBe(false);
  });
});

describe('SessionTracker phases', () => {
  it('appends one status entry per phase change', () => {
    const tracker = new SessionTracker();
    tracker.absorb(view({ phase: 'CLARIFYING' }));
    tracker.absorb(view({ phase: 'CLARIFYING' }));
    tracker.absorb(view({ phase: 'DESIGNING' }));

    expect(tracker.entries.map((e) => e.text)).toEqual([
      'Phase: CLARIFYING',
      'Phase: DESIGNING',
    ]);
    expect(tracker.entries.every((e) => e.author === 'system' && e.kind === 'status')).toBe(true);
  });

  it('marks completion and failure distinctly', () => {
    const done = new SessionTracker();
    done.absorb(view({ phase: 'DONE' }));
    expect(done.entries[0].text).toBe('Session complete - the model was accepted.');

    const failed = new SessionTracker();
    failed.absorb(view({ phase: 'FAILED', error: 'replay exhausted' }));
    expect(failed.entries[0].text).toBe('Session failed: replay exhausted');
  });
});

describe('SessionTracker interactions', () => {
  it('appends a question once across repeated polls', () => {
    const tracker = new SessionTracker();
    const asking = view({
      pending_interaction: { kind: 'question', payload: { text: 'what diameter?' } },
    });
    tracker.absorb(asking);
    tracker.absorb(asking);

    const questions = tracker.entries.filter((e) => e.kind === 'question');
    expect(questions).toHaveLength(1);
    expect(questions[0]).toMatchObject({ author: 'agent', text: 'what diameter?' });
  });

  it('treats a different question as a new entry', () => {
    const tracker = new SessionTracker();
    tracker.absorb(view({ pending_interaction: { kind: 'question', payload: { text: 'a?' } } }));
    tracker.absorb(view({ pending_interaction: { kind: 'question', payload: { text: 'b?' } } }));

    expect(tracker.entries.filter((e) => e.kind === 'question').map((e) => e.text)).toEqual([
      'a?',
      'b?',
    ]);
  });

  it('describes an approval request by attempt number', () => {
    const tracker = new SessionTracker();
    tracker.absorb(
      view({
        phase: 'DESIGNING',
        pending_interaction: { kind: 'approval', payload: { script: 'x = 1', attempt: 2 } },
      }),
    );

    const entry = tracker.entries.find((e) => e.kind === 'approval_request');
    expect(entry?.text).toContain('attempt 2');
  });

  it('orders validation attachments: views by label, then sketches, then model', () => {
    const tracker = new SessionTracker();
    // Deliberately scrambled key order; the tracker must impose VIEW_LABELS order.
    const views: Record<string, string> = {
      front: 'views/front.png',
      isometric: 'views/isometric.png',
      top: 'views/top.png',
      back: 'views/back.png',
      left: 'views/left.png',
      bottom: 'views/bottom.png',
      right: 'views/right.png',
    };
    tracker.absorb(
      view({
        phase: 'VALIDATING',
        pending_interaction: {
          kind: 'validation',
          payload: {
            round: 1,
            message: 'Review the renders.',
            views,
            script: 'result = ...',
            model: 'model.stl',
            sketches: ['inputs/sketch_01.png'],
          },
        },
      }),
    );

    const entry = tracker.entries.find((e) => e.kind === 'validation_request');
    expect(entry?.attachments).toEqual([
      ...VIEW_LABELS.map((label) => `views/${label}.png`),
      'inputs/sketch_01.png',
      'model.stl',
    ]);
  });

  it('appends a new validation entry per round', () => {
    const tracker = new SessionTracker();
    const payload = {
      round: 1,
      message: 'look',
      views: {},
      script: '',
      model: 'model.stl',
      sketches: [],
    };
    tracker.absorb(view({ pending_interaction: { kind: 'validation', payload } }));
    tracker.absorb(view({ pending_interaction: { kind: 'validation', payload } }));
    tracker.absorb(
      view({ pending_interaction: { kind: 'validation', payload: { ...payload, round: 2 } } }),
    );

    expect(tracker.entries.filter((e) => e.kind === 'validation_request')).toHaveLength(2);
  });
});

describe('recordUserAction', () => {
  it('appends the user reply to the log', () => {
    const tracker = new SessionTracker();
    tracker.recordUserAction('2 cm please');
    expect(tracker.entries).toEqual([
      { author: 'user', kind: 'answer', text: '2 cm please', attachments: [] },
    ]);
  });
});
