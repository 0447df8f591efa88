export { PortalClient, PortalError } from "./api.js";
export type { ServiceEntry, ServicesResponse, Thread, ThreadPost, FoldResponse } from "./api.js";
export { contextOf, contextFrom, uriToDocLink } from "./context.js";
export type { UiContext } from "./context.js";
export { FoldController, ELLIPSIS } from "./fold.js";
export { IconMenu } from "./menu.js";
export { DefinitionPopup } from "./definition.js";
export { PrereqView } from "./prereq.js";
export { DiscussionPanel } from "./discussion.js";
export { buildGutters, blockLines, assignThreads } from "./gutters.js";
export type { GutterLine, GutterHandles } from "./gutters.js";
export { attach, ActiveDocument } from "./attach.js";
export type { AttachOptions } from "./attach.js";
