/* tslint:disable */
/* eslint-disable */

/**
 * A built crosswalk held on the JS side.
 */
export class Crosswalk {
    free(): void;
    [Symbol.dispose](): void;
    clusters(k: number): string;
    /**
     * `settings` is a JSON object of [`Settings`] fields; missing ones take
     * their defaults.
     */
    constructor(settings: string);
    summary(): string;
    sweep(): string;
    /**
     * A negative threshold means no None predictions.
     */
    threshold(threshold: number, k: number): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_crosswalk_free: (a: number, b: number) => void;
    readonly crosswalk_clusters: (a: number, b: number) => [number, number, number, number];
    readonly crosswalk_new: (a: number, b: number) => [number, number, number];
    readonly crosswalk_summary: (a: number) => [number, number, number, number];
    readonly crosswalk_sweep: (a: number) => [number, number, number, number];
    readonly crosswalk_threshold: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
