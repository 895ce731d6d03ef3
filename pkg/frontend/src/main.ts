import { ControlChannel } from './channel.js';
import { OperatorConsole } from './console.js';
import { ConsoleStore } from './store.js';

const params = new URLSearchParams(window.location.search);
const url = params.get('engine') ?? `ws://${window.location.hostname}:9001`;

const channel = new ControlChannel(url);
const store = new ConsoleStore();
const root = document.getElementById('console');
if (!root) throw new Error('missing #console mount point');

new OperatorConsole(root, channel, store);
channel.connect();
