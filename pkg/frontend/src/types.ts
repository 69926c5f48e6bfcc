export interface Neighbor {
  node: string;
  room: string;
  direction: string;
  distance: number;
}

export interface DialogEntry {
  inquiry: string;
  response: string;
}

export interface Metrics {
  gp: number;
  success: boolean;
  spl: number;
  sr: number;
  shortest_length: number;
  taken_length: number;
}

export type SessionStatus = 'active' | 'stopped' | 'finished';

export interface StateView {
  session_id: string;
  task_id: string;
  target: string;
  status: SessionStatus;
  current_room: string;
  current_node: string;
  neighbors: Neighbor[];
  steps_taken: number;
  distance_traveled: number;
  dialog: DialogEntry[];
  metrics?: Metrics;
  response?: string;
  record?: Record<string, unknown>;
}

export interface ApiError {
  code: string;
  message: string;
}
