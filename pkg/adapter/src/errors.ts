/** Error taxonomy for the exporter; the CLI maps these to exit codes. */

export class ModelUnavailable extends Error {
  constructor(modelId: string) {
    super(`model backend not available: ${modelId}`);
    this.name = "ModelUnavailable";
  }
}

export class ImageDecodeError extends Error {
  constructor(path: string, reason: string) {
    super(`cannot decode ${path}: ${reason}`);
    this.name = "ImageDecodeError";
  }
}
