import assert from "node:assert/strict";
import test from "node:test";

import { GuardError, ViewStore } from "../src/state.js";

function grantedStore(): ViewStore {
  const store = new ViewStore();
  store.loggedIn("user-1", "tok");
  store.selectExperiment("focal-length", "FL");
  store.granted("fl-1", "sess-1");
  return store;
}

test("controls disabled while idle and queued, enabled when granted", () => {
  const store = new ViewStore();
  store.loggedIn("user-1", "tok");
  store.selectExperiment("focal-length", "FL");
  assert.equal(store.controlsEnabled(), false);
  store.queued(2);
  assert.equal(store.controlsEnabled(), false);
  store.granted("fl-1", "sess-1");
  assert.equal(store.controlsEnabled(), true);
  store.left();
  assert.equal(store.controlsEnabled(), false);
});

test("submitInput never posts unless granted", async () => {
  const store = new ViewStore();
  store.loggedIn("user-1", "tok");
  store.selectExperiment("focal-length", "FL");
  store.queued(1);
  let posts = 0;
  const post = async () => {
    posts += 1;
    return {};
  };
  await assert.rejects(
    () => store.submitInput({ target: "screen", steps: 100 }, post),
    GuardError,
  );
  assert.equal(posts, 0);
  store.granted("fl-1", "sess-1");
  await store.submitInput({ target: "screen", steps: 100 }, post);
  assert.equal(posts, 1);
});

test("queue token history decrements monotonically and reaches 1", () => {
  const store = new ViewStore();
  store.loggedIn("user-2", "tok");
  store.selectExperiment("focal-length", "FL");
  store.queued(3);
  store.queued(3); // repeated poll with the same token is not a new step
  store.queued(2);
  store.queued(1);
  assert.deepEqual(store.state.tokenHistory, [3, 2, 1]);
  assert.equal(store.tokenHistoryMonotonic(), true);
  assert.equal(store.reachedFrontBeforeGrant(), true);
  store.granted("fl-1", "sess-9");
  assert.equal(store.controlsEnabled(), true);
});

test("a token that goes backwards is flagged", () => {
  const store = new ViewStore();
  store.selectExperiment("focal-length", "FL");
  store.queued(2);
  store.queued(3);
  assert.equal(store.tokenHistoryMonotonic(), false);
});

test("focal readout follows the output pins", () => {
  const store = grantedStore();
  assert.equal(store.focalReadout(), null);
  store.pinsUpdated({ V0: 20.59, V1: 20.38 });
  const f = store.focalReadout();
  assert.ok(f !== null && Math.abs(f - 10.24) <= 0.01);
  // a result row was appended for the table
  assert.equal(store.state.results.length, 1);
  assert.equal(store.state.results[0].uCm, 20.59);
  // same pins again: no duplicate row
  store.pinsUpdated({ V0: 20.59, V1: 20.38 });
  assert.equal(store.state.results.length, 1);
});

test("focal readout is null for the rod rig", () => {
  const store = new ViewStore();
  store.selectExperiment("vanishing-rod", "VR");
  store.granted("vr-1", "sess-2");
  store.pinsUpdated({ V0: 12.5 });
  assert.equal(store.focalReadout(), null);
});

test("stream staleness flips after five silent seconds in session", () => {
  const store = grantedStore();
  store.frameArrived(1000);
  assert.equal(store.checkStale(2000), false);
  assert.equal(store.checkStale(6001), true);
  assert.equal(store.state.streamStale, true);
  store.frameArrived(6200);
  assert.equal(store.state.streamStale, false);
  // staleness is a session concept: idle viewers see no banner
  store.left();
  assert.equal(store.checkStale(99999), false);
});
