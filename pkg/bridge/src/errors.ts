export class BridgeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** The checkpoint requires channels absent from the epoch store's montage. */
export class ChannelSetUnsupported extends BridgeError {}
