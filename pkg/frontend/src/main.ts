/** Browser entry point: mount the console against the session service. */

import { ApiClient } from "./api";
import { mountConsole } from "./app";

const DEFAULT_SERVICE_URL = "http://127.0.0.1:8000";

function serviceUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("service") ?? DEFAULT_SERVICE_URL;
}

const root = document.getElementById("app");
if (!root) throw new Error("index.html must provide a #app element");

const app = mountConsole(root, new ApiClient(serviceUrl()));
void app.start();
