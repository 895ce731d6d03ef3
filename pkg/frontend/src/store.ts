// Console state: strictly pessimistic. Displayed parameters come only
// from engine acknowledgements (status broadcasts); local edits are
// in-flight until the engine confirms or rejects them.

import { ChainParams, CueInfo, StatusMessage } from './protocol.js';

export interface ConsoleState {
  connection: 'connecting' | 'connected' | 'disconnected';
  params: ChainParams | null; // last acknowledged engine truth
  cueIndex: number;
  cues: CueInfo[];
  activeNotes: number;
  lastError: string | null;
}

export type StoreListener = (state: ConsoleState) => void;

export class ConsoleStore {
  private state: ConsoleState = {
    connection: 'disconnected',
    params: null,
    cueIndex: 0,
    cues: [],
    activeNotes: 0,
    lastError: null,
  };
  private listeners: StoreListener[] = [];

  get(): ConsoleState {
    return this.state;
  }

  subscribe(listener: StoreListener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  applyStatus(status: StatusMessage): void {
    this.state = {
      ...this.state,
      params: status.params,
      cueIndex: status.cue_index,
      cues: status.cues,
      activeNotes: status.active_notes,
    };
    this.emit();
  }

  setConnection(connection: ConsoleState['connection']): void {
    this.state = { ...this.state, connection };
    this.emit();
  }

  setError(message: string | null): void {
    this.state = { ...this.state, lastError: message };
    this.emit();
  }

  private emit(): void {
    for (const l of this.listeners) l(this.state);
  }
}
