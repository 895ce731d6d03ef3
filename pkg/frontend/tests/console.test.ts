import { beforeEach, describe, expect, it } from 'vitest';

import { ControlChannel } from '../src/channel.js';
import { OperatorConsole } from '../src/console.js';
import { ConsoleStore } from '../src/store.js';
import { FakeSocket, MockEngine } from './mock-engine.js';

function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

describe('OperatorConsole', () => {
  let engine: MockEngine;
  let root: HTMLElement;
  let channel: ControlChannel;
  let store: ConsoleStore;
  let consoleUi: OperatorConsole;
  let sock: FakeSocket;

  beforeEach(() => {
    document.body.innerHTML = '<div id="console"></div>';
    engine = new MockEngine();
    root = document.getElementById('console')!;
    channel = new ControlChannel('ws://test', { socketFactory: engine.factory });
    store = new ConsoleStore();
    consoleUi = new OperatorConsole(root, channel, store);
    channel.connect();
    sock = engine.sockets[0];
    sock.open();
    sock.push(engine.status());
  });

  function slider(id: string): HTMLInputElement {
    return root.querySelector(`#${id}`) as HTMLInputElement;
  }

  it('displays the engine-acknowledged parameters after connect', () => {
    expect(slider('delay').value).toBe('0');
    expect(slider('speed').value).toBe('1');
    expect(root.querySelector('#conn')!.textContent).toBe('connected');
    expect(root.querySelector('#cue-name')!.textContent).toBe('Opening');
    expect(root.querySelectorAll('#cue-list li')).toHaveLength(3);
  });

  it('shows an accepted edit only once the engine confirms it', async () => {
    const delay = slider('delay');
    delay.value = '350';
    delay.dispatchEvent(new Event('change'));
    await flush();
    expect(engine.received.at(-1)).toMatchObject({
      cmd: 'set_param',
      args: { path: 'delay_ms', value: 350 },
    });
    expect(engine.params.delay_ms).toBe(350);
    expect(delay.value).toBe('350');
    expect(root.querySelector('#delay-value')!.textContent).toBe('350');
    expect((root.querySelector('#toast') as HTMLElement).hidden).toBe(true);
  });

  it('reverts a rejected edit and surfaces the error', async () => {
    engine.mode = 'reject-all';
    const speed = slider('speed');
    speed.value = '2';
    speed.dispatchEvent(new Event('change'));
    await flush();
    expect(speed.value).toBe('1'); // back to acknowledged truth
    const toast = root.querySelector('#toast') as HTMLElement;
    expect(toast.hidden).toBe(false);
    expect(toast.textContent).toMatch(/scripted rejection/);
  });

  it('reverts every kind of control under an all-rejecting engine', async () => {
    engine.mode = 'reject-all';
    const pedal = root.querySelector('#pedal') as HTMLSelectElement;
    pedal.value = 'force_on';
    pedal.dispatchEvent(new Event('change'));
    await flush();
    expect(pedal.value).toBe('pass');

    (root.querySelector('#cue-next') as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector('#cue-name')!.textContent).toBe('Opening');
    expect((root.querySelector('#toast') as HTMLElement).hidden).toBe(false);
  });

  it('locks a control while its command is in flight', async () => {
    engine.mode = 'silent';
    const delay = slider('delay');
    delay.value = '100';
    delay.dispatchEvent(new Event('change'));
    await Promise.resolve();
    expect(delay.disabled).toBe(true);
    // the stop button must stay live even with a command pending
    expect((root.querySelector('#stop') as HTMLButtonElement).disabled).toBe(false);
  });

  it('walks the cue list with buttons and clicks', async () => {
    (root.querySelector('#cue-next') as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector('#cue-name')!.textContent).toBe('Layers');

    const items = root.querySelectorAll('#cue-list li');
    (items[2] as HTMLElement).click();
    await flush();
    expect(engine.cueIndex).toBe(2);
    expect(root.querySelector('#cue-name')!.textContent).toBe('Coda');
    expect(root.querySelector('#cue-list li.current')!.textContent).toBe('Coda');

    (root.querySelector('#cue-prev') as HTMLButtonElement).click();
    await flush();
    expect(root.querySelector('#cue-name')!.textContent).toBe('Layers');
  });

  it('sends stop from the button and from the space bar', async () => {
    (root.querySelector('#stop') as HTMLButtonElement).click();
    await flush();
    expect(engine.received.at(-1)?.cmd).toBe('stop');
    expect(engine.params.stopped).toBe(true);

    engine.params.stopped = false;
    document.dispatchEvent(new KeyboardEvent('keydown', { code: 'Space' }));
    await flush();
    expect(engine.params.stopped).toBe(true);
  });

  it('steps cues with the arrow keys', async () => {
    document.dispatchEvent(new KeyboardEvent('keydown', { code: 'ArrowRight' }));
    await flush();
    expect(engine.cueIndex).toBe(1);
    document.dispatchEvent(new KeyboardEvent('keydown', { code: 'ArrowLeft' }));
    await flush();
    expect(engine.cueIndex).toBe(0);
  });

  it('disables every control, stop included, when disconnected', async () => {
    sock.drop();
    await flush();
    expect(root.querySelector('#conn')!.textContent).toBe('disconnected');
    expect(slider('delay').disabled).toBe(true);
    expect((root.querySelector('#stop') as HTMLButtonElement).disabled).toBe(true);
    channel.close();
  });

  it('renders monitor lanes with a latency readout', () => {
    sock.push({
      type: 'monitor',
      frames: [
        { t: 1_000_000, direction: 'in',
          event: { type: 'note', kind: 'on', pitch: 60, velocity: 90,
                   t: 1_000_000, source: 'amt' } },
        { t: 1_350_000, direction: 'out',
          event: { type: 'note', kind: 'on', pitch: 60, velocity: 90,
                   t: 1_350_000, source: 'chain' } },
      ],
    });
    expect(root.querySelectorAll('#lane-in li')).toHaveLength(1);
    expect(root.querySelectorAll('#lane-out li')).toHaveLength(1);
    expect(root.querySelector('#lane-out li')!.textContent).toMatch(/\+350 ms/);
    expect(root.querySelector('#latency')!.textContent).toBe('median latency 350 ms');
    expect(consoleUi.monitor.size()).toBe(2);
  });

  it('shows loop state from status broadcasts', () => {
    engine.params.loop = {
      min_period_ms: 1000, mode: 'playing', period_ms: 2000, repeats: null,
    };
    sock.push(engine.status());
    expect(root.querySelector('#loop-badge')!.textContent).toBe('playing');
  });
});
