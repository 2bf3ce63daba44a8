/**
 * Console round trip against the live service: create a fixture session,
 * stream automated execution, complete all pending manual entries through
 * the wizard, and check the verdict panel equals the CLI's report for the
 * same session. Requires the python package to be installed (pip install -e .).
 */

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { execFile, spawn, type ChildProcess } from 'node:child_process';
import { mkdtemp, readFile, rm } from 'node:fs/promises';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { promisify } from 'node:util';

import { ApiClient, ApiError } from '../src/api.js';
import { SessionViewState } from '../src/state.js';
import { ManualWizard } from '../src/wizard.js';
import type { ProtocolDocument, ReportDocument } from '../src/types.js';

const execFileAsync = promisify(execFile);
const PYTHON = process.env.IOTSAM_PYTHON ?? 'python3';
const HELPER = join(__dirname, 'helpers', 'launch_env.py');

interface Env {
  base: string;
  store: string;
  device: string;
  profile: string;
  catalog: string;
  plan: string;
}

let child: ChildProcess;
let env: Env;
let workdir: string;

async function launchEnvironment(): Promise<Env> {
  workdir = await mkdtemp(join(tmpdir(), 'iotsam-console-'));
  child = spawn(PYTHON, [HELPER, workdir], { stdio: ['ignore', 'pipe', 'pipe'] });
  let stderr = '';
  child.stderr!.on('data', (chunk: Buffer) => {
    stderr += chunk.toString();
  });
  return await new Promise<Env>((resolve, reject) => {
    let buffer = '';
    const timer = setTimeout(
      () => reject(new Error(`environment did not come up:\n${stderr}`)),
      30_000,
    );
    child.stdout!.on('data', (chunk: Buffer) => {
      buffer += chunk.toString();
      const newline = buffer.indexOf('\n');
      if (newline >= 0) {
        clearTimeout(timer);
        resolve(JSON.parse(buffer.slice(0, newline)) as Env);
      }
    });
    child.on('exit', (code) => {
      clearTimeout(timer);
      reject(new Error(`helper exited with ${code}:\n${stderr}`));
    });
  });
}

async function waitForApi(base: string): Promise<void> {
  for (let attempt = 0; attempt < 50; attempt += 1) {
    try {
      const response = await fetch(`${base}/api/v1/sessions`);
      if (response.ok) {
        return;
      }
    } catch {
      // server still starting
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
  throw new Error('service never became reachable');
}

beforeAll(async () => {
  env = await launchEnvironment();
  await waitForApi(env.base);
}, 60_000);

afterAll(async () => {
  child?.kill();
  if (workdir) {
    await rm(workdir, { recursive: true, force: true });
  }
});

async function documentBlob(path: string): Promise<Blob> {
  return new Blob([await readFile(path)], { type: 'application/json' });
}

describe('console round trip', () => {
  let api: ApiClient;
  let sessionId: string;
  let state: SessionViewState;

  it('creates a session from the four documents', async () => {
    api = new ApiClient(env.base);
    sessionId = await api.createSession({
      device: await documentBlob(env.device),
      profile: await documentBlob(env.profile),
      catalog: await documentBlob(env.catalog),
      plan: await documentBlob(env.plan),
    });
    expect(sessionId).toMatch(/^\d{4}-/);
    const summary = await api.getSession(sessionId);
    expect(summary.state).toBe('PLANNED');
    expect(summary.entries).toBe(9);
  });

  it('streams automated protocols in canonical plan order', async () => {
    const plan = await api.getPlan(sessionId);
    state = new SessionViewState(plan);
    const streamed: string[] = [];
    await api.executeAutomated(sessionId, (event) => {
      if (event.event === 'protocol') {
        const protocol = JSON.parse(event.data) as ProtocolDocument;
        streamed.push(protocol['plan-entry-id']);
        state.applyProtocol(protocol);
      }
    });
    expect(streamed).toEqual([
      'TC-NET-001@nw-telnet',
      'TC-NET-004@nw-telnet',
      'TC-NET-003@nw-https',
      'TC-NET-002@nw-https',
      'TC-NET-005@nw-telnet',
    ]);
    const chips = new Map(state.rows.map((row) => [row.entryId, row.chip]));
    expect(chips.get('TC-NET-001@nw-telnet')).toBe('fail');
    expect(chips.get('TC-NET-004@nw-telnet')).toBe('fail');
    expect(chips.get('TC-NET-003@nw-https')).toBe('fail');
    expect(chips.get('TC-NET-002@nw-https')).toBe('pass');
    expect(chips.get('TC-NET-005@nw-telnet')).toBe('pass');
  }, 60_000);

  it('refetched state matches the streamed table (reconnect contract)', async () => {
    const response = await fetch(`${env.base}/api/v1/sessions/${sessionId}/protocols`);
    expect(response.ok).toBe(true);
    const { protocols } = (await response.json()) as { protocols: ProtocolDocument[] };
    const refetched = new SessionViewState(await api.getPlan(sessionId));
    refetched.reconcile(protocols, null);
    expect(refetched.rows).toEqual(state.rows);
  });

  it('lists exactly the four pending manual entries', async () => {
    const pending = await api.pendingManual(sessionId);
    expect(pending.map((entry) => entry['plan-entry-id'])).toEqual([
      'TC-NET-006@nw-telnet',
      'TC-PHY-008@mcu',
      'TC-PHY-009@mcu',
      'TC-RF-007@wl-wifi',
    ]);
    expect(state.pendingManualIds()).toEqual(pending.map((e) => e['plan-entry-id']));
  });

  it('duplicate submission from a second tab: one 201, one 409', async () => {
    const pending = await api.pendingManual(sessionId);
    const entry = pending[0];

    const submissionFrom = (assessor: string) => {
      const wizard = new ManualWizard(entry);
      entry['instantiated-guide'].forEach((_, index) => {
        wizard.recordObservation(index, `observed by ${assessor}`);
        wizard.confirmStep(index);
      });
      wizard.setOutcome('PASS');
      return wizard.buildSubmission(assessor);
    };

    const results = await Promise.allSettled([
      api.submitManualResult(sessionId, submissionFrom('tab-one')),
      api.submitManualResult(sessionId, submissionFrom('tab-two')),
    ]);
    const fulfilled = results.filter((r) => r.status === 'fulfilled');
    const conflicts = results.filter(
      (r): r is PromiseRejectedResult =>
        r.status === 'rejected' && r.reason instanceof ApiError &&
        r.reason.status === 409,
    );
    expect(fulfilled).toHaveLength(1);
    expect(conflicts).toHaveLength(1);
    expect((conflicts[0].reason as ApiError).code).toBe('DUPLICATE_ENTRY');

    // the conflict handling removes the entry from the local queue
    const refreshed = await api.pendingManual(sessionId);
    expect(refreshed.map((e) => e['plan-entry-id'])).not.toContain(
      entry['plan-entry-id'],
    );
  });

  it('completes the remaining manual entries through the wizard', async () => {
    let pending = await api.pendingManual(sessionId);
    expect(pending).toHaveLength(3);
    for (const entry of pending) {
      const wizard = new ManualWizard(entry);
      entry['instantiated-guide'].forEach((_, index) => {
        wizard.recordObservation(index, 'as documented');
        wizard.confirmStep(index);
      });
      wizard.setOutcome('PASS');
      const protocol = await api.submitManualResult(
        sessionId, wizard.buildSubmission('console-assessor'),
      );
      expect(protocol.outcome).toBe('PASS');
      state.applyProtocol(protocol);
    }
    pending = await api.pendingManual(sessionId);
    expect(pending).toHaveLength(0);
    const summary = await api.getSession(sessionId);
    expect(summary['all-covered']).toBe(true);
  });

  it('verdict panel equals the CLI report for the same session', async () => {
    const report = await api.assess(sessionId, 'lab-default');
    state.report = report;
    expect(report.result).toBe('INSECURE');
    const failed = report.verdicts
      .filter((verdict) => verdict['effective-outcome'] === 'FAIL')
      .map((verdict) => verdict['case-id'])
      .sort();
    expect(failed).toEqual(['TC-NET-001', 'TC-NET-003', 'TC-NET-004']);

    const { stdout } = await execFileAsync(PYTHON, [
      '-m', 'iotsam.cli', 'report',
      '--store', env.store,
      '--session-id', sessionId,
      '--format', 'machine',
    ]);
    const cliReport = JSON.parse(stdout) as ReportDocument;
    expect(report).toEqual(cliReport);
  });

  it('serves the built console assets at the root', async () => {
    const response = await fetch(`${env.base}/`);
    expect(response.ok).toBe(true);
    const html = await response.text();
    expect(html).toContain('iotsam assessor console');
  });
});
