export * from "./schemas.js";
export * from "./pyjson.js";
export * from "./design.js";
export * from "./format.js";
export * from "./api.js";
export * from "./viewer.js";
export * from "./measure.js";
export * from "./session.js";
