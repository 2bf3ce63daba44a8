import { describe, expect, it } from 'vitest';

import { SessionViewState, chipForOutcome } from '../src/state.js';
import type { PlanDocument, ProtocolDocument } from '../src/types.js';

function plan(): PlanDocument {
  return {
    kind: 'test-plan',
    'plan-id': 'plan-x',
    'device-id': 'smart-lock-01',
    entries: [
      { 'plan-entry-id': 'TC-A@c1', 'case-id': 'TC-A', 'target-component-id': 'c1',
        'execution-mode': 'AUTOMATED', 'instantiated-guide': [] },
      { 'plan-entry-id': 'TC-B@c1', 'case-id': 'TC-B', 'target-component-id': 'c1',
        'execution-mode': 'MANUAL', 'instantiated-guide': ['look'] },
      { 'plan-entry-id': 'TC-C@c2', 'case-id': 'TC-C', 'target-component-id': 'c2',
        'execution-mode': 'AUTOMATED', 'instantiated-guide': [] },
    ],
  };
}

function protocol(entryId: string, outcome: ProtocolDocument['outcome']): ProtocolDocument {
  return {
    kind: 'execution-protocol',
    'protocol-id': `exec-${entryId}`,
    'plan-entry-id': entryId,
    'case-id': entryId.split('@')[0],
    outcome,
    'outcome-rationale': `${outcome} because so`,
  };
}

describe('chipForOutcome', () => {
  it('maps every outcome to its chip', () => {
    expect(chipForOutcome('PASS')).toBe('pass');
    expect(chipForOutcome('FAIL')).toBe('fail');
    expect(chipForOutcome('INCONCLUSIVE')).toBe('inconclusive');
    expect(chipForOutcome('SKIPPED')).toBe('skipped');
    expect(chipForOutcome('ERROR')).toBe('error');
  });
});

describe('SessionViewState', () => {
  it('keeps canonical plan order regardless of event arrival order', () => {
    const state = new SessionViewState(plan());
    state.applyProtocol(protocol('TC-C@c2', 'PASS'));
    state.applyProtocol(protocol('TC-A@c1', 'FAIL'));
    expect(state.rows.map((row) => row.entryId)).toEqual([
      'TC-A@c1', 'TC-B@c1', 'TC-C@c2',
    ]);
    expect(state.rows.map((row) => row.chip)).toEqual(['fail', 'pending', 'pass']);
  });

  it('marks only pending automated rows as running', () => {
    const state = new SessionViewState(plan());
    state.applyProtocol(protocol('TC-A@c1', 'PASS'));
    state.markAutomatedRunning();
    expect(state.rows.map((row) => row.chip)).toEqual(['pass', 'pending', 'running']);
  });

  it('ignores protocols for entries outside the plan', () => {
    const state = new SessionViewState(plan());
    state.applyProtocol(protocol('TC-GHOST@zz', 'FAIL'));
    expect(state.counts().pending).toBe(3);
  });

  it('reconcile replaces stream state with the authoritative view', () => {
    const state = new SessionViewState(plan());
    state.markAutomatedRunning();
    state.applyProtocol(protocol('TC-A@c1', 'ERROR'));
    state.reconcile([protocol('TC-A@c1', 'PASS')], null);
    expect(state.rows[0].chip).toBe('pass');
    expect(state.rows[2].chip).toBe('pending'); // running flag not persisted
    expect(state.report).toBeNull();
  });

  it('tracks the pending manual queue', () => {
    const state = new SessionViewState(plan());
    expect(state.pendingManualIds()).toEqual(['TC-B@c1']);
    state.applyProtocol(protocol('TC-B@c1', 'PASS'));
    expect(state.pendingManualIds()).toEqual([]);
  });

  it('flags the empty plan', () => {
    const state = new SessionViewState({
      kind: 'test-plan', 'plan-id': 'p', 'device-id': 'd', entries: [],
    });
    expect(state.emptyPlan).toBe(true);
  });
});
