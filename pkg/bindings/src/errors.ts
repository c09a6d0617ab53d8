/** Raised when the core pipeline process reports a failure. */
export class CoreError extends Error {
  /** "input" mirrors the core's bad-input/usage exit, "internal" its bug exit. */
  readonly kind: "input" | "internal";
  readonly exitCode: number;
  readonly stderr: string;

  constructor(kind: "input" | "internal", message: string, exitCode: number, stderr: string) {
    super(message);
    this.name = "CoreError";
    this.kind = kind;
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/** Raised when a tokenizer handle is used after close(). */
export class HandleClosedError extends Error {
  constructor(message = "tokenizer handle is closed") {
    super(message);
    this.name = "HandleClosedError";
  }
}

/** Raised when inputs cannot be represented in the core's file formats. */
export class MarshalError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MarshalError";
  }
}
