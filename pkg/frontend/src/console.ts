// The operator console: one control per engine feature, a cue list, and
// the live event monitor. All displayed values are engine-acknowledged;
// a control locks while its command is in flight and reverts on
// rejection. STOP stays one interaction away from everywhere (button or
// space bar).

import { ControlChannel } from './channel.js';
import { EventMonitor } from './monitor.js';
import { ChainParams, EventPayload, MonitorMessage, StatusMessage } from './protocol.js';
import { ConsoleStore } from './store.js';

interface SliderSpec {
  id: string;
  label: string;
  path: string;
  min: number;
  max: number;
  step: number;
  read: (p: ChainParams) => number;
}

const SLIDERS: SliderSpec[] = [
  { id: 'delay', label: 'Delay (ms)', path: 'delay_ms', min: 0, max: 5000, step: 10,
    read: (p) => p.delay_ms },
  { id: 'speed', label: 'Loop speed', path: 'speed', min: 0.25, max: 4.0, step: 0.05,
    read: (p) => p.speed },
  { id: 'velscale', label: 'Velocity scale', path: 'velocity.scale', min: 0, max: 2.0,
    step: 0.05, read: (p) => p.velocity.scale },
  { id: 'veloffset', label: 'Velocity offset', path: 'velocity.offset', min: -64,
    max: 64, step: 1, read: (p) => p.velocity.offset },
];

const PEDAL_MODES = ['pass', 'force_on', 'force_off', 'suppress'] as const;

export class OperatorConsole {
  readonly monitor = new EventMonitor();

  private root: HTMLElement;
  private channel: ControlChannel;
  private store: ConsoleStore;
  private controls = new Map<string, HTMLInputElement | HTMLSelectElement>();
  private locked = new Set<string>();

  constructor(root: HTMLElement, channel: ControlChannel, store: ConsoleStore) {
    this.root = root;
    this.channel = channel;
    this.store = store;
    channel.onStatus = (s) => this.handleStatus(s);
    channel.onMonitor = (m) => this.handleMonitor(m);
    channel.onConnectionChange = (state) => {
      store.setConnection(state);
      this.syncDisabled();
      this.renderConnection();
    };
    this.buildDom();
    store.subscribe(() => this.renderFromState());
    document.addEventListener('keydown', (ev) => this.handleKey(ev));
  }

  // --- command plumbing --------------------------------------------------

  private async issue(controlId: string, cmd: string,
                      args?: Record<string, unknown>): Promise<void> {
    this.locked.add(controlId);
    this.syncDisabled();
    const reply = await this.channel.send(cmd, args);
    this.locked.delete(controlId);
    if (!reply.ok) {
      this.store.setError(reply.error ?? 'command rejected');
      this.renderFromState(); // revert the control to acknowledged truth
    } else {
      this.store.setError(null);
    }
    this.syncDisabled();
  }

  stop(): void {
    void this.issue('stop', 'stop');
  }

  // --- engine messages ---------------------------------------------------

  private handleStatus(status: StatusMessage): void {
    this.store.applyStatus(status);
  }

  private handleMonitor(message: MonitorMessage): void {
    this.monitor.push(message.frames);
    this.renderMonitor();
  }

  private handleKey(ev: KeyboardEvent): void {
    if (ev.code === 'Space') {
      ev.preventDefault();
      this.stop();
    } else if (ev.code === 'ArrowRight') {
      void this.issue('cue-next', 'next_cue');
    } else if (ev.code === 'ArrowLeft') {
      void this.issue('cue-prev', 'prev_cue');
    }
  }

  // --- DOM ---------------------------------------------------------------

  private buildDom(): void {
    this.root.innerHTML = `
      <header>
        <span id="conn" class="badge">disconnected</span>
        <span id="toast" class="toast" hidden></span>
      </header>
      <section id="sliders"></section>
      <section id="pedal-section">
        <label for="pedal">Pedal</label>
        <select id="pedal">
          ${PEDAL_MODES.map((m) => `<option value="${m}">${m}</option>`).join('')}
        </select>
      </section>
      <section id="loop-section">
        <span id="loop-badge" class="badge">idle</span>
        <button id="loop-capture">Capture</button>
        <button id="loop-capture-stop">End capture</button>
        <button id="loop-play">Play loop</button>
        <button id="loop-stop">Stop loop</button>
      </section>
      <section id="cue-section">
        <button id="cue-prev">&#8592; Prev</button>
        <span id="cue-name" class="badge"></span>
        <button id="cue-next">Next &#8594;</button>
        <ol id="cue-list"></ol>
      </section>
      <button id="stop" class="stop-button">STOP</button>
      <button id="reset">Reset</button>
      <section id="monitor">
        <div class="lane"><h3>In</h3><ul id="lane-in"></ul></div>
        <div class="lane"><h3>Out</h3><ul id="lane-out"></ul></div>
        <div id="latency" class="badge"></div>
        <div id="idle-indicator">listening&hellip;</div>
      </section>
    `;
    const sliders = this.root.querySelector('#sliders')!;
    for (const spec of SLIDERS) {
      const wrap = document.createElement('div');
      wrap.innerHTML = `
        <label for="${spec.id}">${spec.label}</label>
        <input type="range" id="${spec.id}" min="${spec.min}" max="${spec.max}"
               step="${spec.step}" disabled>
        <output id="${spec.id}-value"></output>
      `;
      sliders.appendChild(wrap);
      const input = wrap.querySelector('input')!;
      input.addEventListener('change', () => {
        void this.issue(spec.id, 'set_param',
                        { path: spec.path, value: Number(input.value) });
      });
      this.controls.set(spec.id, input);
    }
    const pedal = this.root.querySelector('#pedal') as HTMLSelectElement;
    pedal.addEventListener('change', () => {
      void this.issue('pedal', 'set_param', { path: 'pedal_mode', value: pedal.value });
    });
    this.controls.set('pedal', pedal);

    this.bindButton('loop-capture', 'loop_start_capture');
    this.bindButton('loop-capture-stop', 'loop_stop_capture');
    this.bindButton('loop-play', 'loop_play');
    this.bindButton('loop-stop', 'loop_stop');
    this.bindButton('cue-next', 'next_cue');
    this.bindButton('cue-prev', 'prev_cue');
    this.bindButton('reset', 'reset');
    this.root.querySelector('#stop')!
      .addEventListener('click', () => this.stop());
    this.syncDisabled();
  }

  private bindButton(id: string, cmd: string): void {
    this.root.querySelector(`#${id}`)!
      .addEventListener('click', () => void this.issue(id, cmd));
  }

  private renderFromState(): void {
    const { params, cues, cueIndex, lastError } = this.store.get();
    if (params) {
      for (const spec of SLIDERS) {
        const input = this.controls.get(spec.id) as HTMLInputElement;
        if (!this.locked.has(spec.id)) input.value = String(spec.read(params));
        this.root.querySelector(`#${spec.id}-value`)!.textContent =
          String(spec.read(params));
      }
      (this.controls.get('pedal') as HTMLSelectElement).value = params.pedal_mode;
      this.root.querySelector('#loop-badge')!.textContent = params.loop.mode;
    }
    const cueName = this.root.querySelector('#cue-name')!;
    cueName.textContent = cues[cueIndex]?.name ?? '';
    const list = this.root.querySelector('#cue-list')!;
    list.innerHTML = '';
    cues.forEach((cue, i) => {
      const li = document.createElement('li');
      li.textContent = cue.name;
      if (i === cueIndex) li.classList.add('current');
      li.addEventListener('click', () => {
        void this.issue('cue-list', 'goto_cue', { index: i });
      });
      list.appendChild(li);
    });
    const toast = this.root.querySelector('#toast') as HTMLElement;
    if (lastError) {
      toast.textContent = lastError;
      toast.hidden = false;
    } else {
      toast.hidden = true;
    }
    this.renderConnection();
  }

  private renderConnection(): void {
    const conn = this.root.querySelector('#conn')!;
    conn.textContent = this.store.get().connection;
  }

  private renderMonitor(): void {
    for (const direction of ['in', 'out'] as const) {
      const lane = this.root.querySelector(`#lane-${direction}`)!;
      lane.innerHTML = '';
      for (const entry of this.monitor.lane(direction, 20)) {
        const li = document.createElement('li');
        li.textContent = describeEntry(entry.frame.t, entry.frame.event,
                                       entry.latencyUs);
        lane.appendChild(li);
      }
    }
    const med = this.monitor.medianLatencyMs();
    this.root.querySelector('#latency')!.textContent =
      med === null ? '' : `median latency ${med.toFixed(0)} ms`;
    (this.root.querySelector('#idle-indicator') as HTMLElement).hidden =
      this.monitor.size() > 0;
  }

  private syncDisabled(): void {
    const disconnected = this.store.get().connection !== 'connected';
    for (const [id, control] of this.controls) {
      control.disabled = disconnected || this.locked.has(id);
    }
    this.root.querySelectorAll('button').forEach((button) => {
      if (button.id === 'stop') {
        // STOP must stay reachable whenever a connection exists at all.
        button.disabled = disconnected;
        return;
      }
      button.disabled = disconnected || this.locked.has(button.id);
    });
  }
}

function describeEntry(t: number, event: EventPayload,
                       latencyUs: number | null): string {
  const ms = (t / 1000).toFixed(1);
  let what: string;
  if (event.type === 'note') {
    what = `${event.kind} ${event.pitch} v${event.velocity}`;
  } else if (event.type === 'pedal') {
    what = `pedal ${event.value}`;
  } else {
    what = `marker ${event.label}`;
  }
  const lat = latencyUs === null ? '' : ` (+${(latencyUs / 1000).toFixed(0)} ms)`;
  return `${ms} ${what}${lat}`;
}
