// Wire types for the engine's control channel (JSON over WebSocket).

export interface ChainParams {
  velocity: { scale: number; offset: number };
  delay_ms: number;
  speed: number;
  pedal_mode: 'pass' | 'force_on' | 'force_off' | 'suppress';
  loop: {
    min_period_ms: number;
    mode: 'idle' | 'capturing' | 'playing';
    period_ms: number;
    repeats: number | null;
  };
  stopped: boolean;
}

export interface CueInfo {
  name: string;
  notes: string;
  params: Record<string, unknown>;
}

export interface StatusMessage {
  type: 'status';
  params: ChainParams;
  cue_index: number;
  cues: CueInfo[];
  active_notes: number;
  pending: number;
}

export interface NotePayload {
  type: 'note';
  kind: 'on' | 'off';
  pitch: number;
  velocity: number;
  t: number;
  source: string;
}

export interface PedalPayload {
  type: 'pedal';
  value: number;
  t: number;
  source: string;
}

export interface MarkerPayload {
  type: 'marker';
  label: string;
  t: number;
  source: string;
}

export type EventPayload = NotePayload | PedalPayload | MarkerPayload;

export interface MonitorFrame {
  t: number;
  direction: 'in' | 'out';
  event: EventPayload;
}

export interface MonitorMessage {
  type: 'monitor';
  frames: MonitorFrame[];
}

export interface CommandRequest {
  id: number;
  cmd: string;
  args?: Record<string, unknown>;
}

export interface CommandReply {
  id: number;
  ok: boolean;
  detail?: Record<string, unknown>;
  error?: string;
}

export type ServerMessage = StatusMessage | MonitorMessage | CommandReply;

export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== 'object' || obj === null) return null;
  return obj as ServerMessage;
}

export function isStatus(m: ServerMessage): m is StatusMessage {
  return (m as StatusMessage).type === 'status';
}

export function isMonitor(m: ServerMessage): m is MonitorMessage {
  return (m as MonitorMessage).type === 'monitor';
}

export function isReply(m: ServerMessage): m is CommandReply {
  return (m as CommandReply).id !== undefined && !('type' in m);
}
