import { ApiClient } from "./api.js";
import { Dashboard } from "./ui.js";

// service addresses: same host by default, overridable via query parameters
// (?orchestrator=http://...&signaling=http://...)
const params = new URLSearchParams(location.search);
const orchestrator = params.get("orchestrator") ?? `http://${location.hostname}:8700`;
const signaling = params.get("signaling") ?? `http://${location.hostname}:8702`;

const dashboard = new Dashboard(new ApiClient(orchestrator, signaling));
dashboard.mount();
