//! In-process fan-out of service events.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::provenance::{EnsembleId, ProjectId, RunId, RunStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Frame {
        run_id: RunId,
        domain_id: u32,
        step_hour: u32,
    },
    RunStatus {
        run_id: RunId,
        status: RunStatus,
    },
    EnsembleChanged {
        ensemble_id: EnsembleId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub project_id: ProjectId,
    pub ts: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn now(project_id: ProjectId, kind: EventKind) -> Self {
        Self {
            project_id,
            ts: Utc::now(),
            kind,
        }
    }
}

type Callback = Box<dyn Fn(&Event) + Send + Sync>;

/// Synchronous publish/subscribe. Callbacks run on the publishing thread and
/// must not block.
#[derive(Default)]
pub struct EventBus {
    next: AtomicU64,
    subs: Mutex<BTreeMap<u64, Callback>>,
}

impl std::fmt::Debug for EventBus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventBus").field("subscribers", &self.subs.lock().len()).finish()
    }
}

impl EventBus {
    pub fn subscribe(&self, f: impl Fn(&Event) + Send + Sync + 'static) -> u64 {
        let id = self.next.fetch_add(1, Ordering::Relaxed);
        self.subs.lock().insert(id, Box::new(f));
        id
    }

    /// Subscription delivering into a channel.
    pub fn channel(&self) -> (u64, crossbeam_channel::Receiver<Event>) {
        let (tx, rx) = crossbeam_channel::unbounded();
        let id = self.subscribe(move |e| {
            let _ = tx.send(e.clone());
        });
        (id, rx)
    }

    pub fn unsubscribe(&self, id: u64) {
        self.subs.lock().remove(&id);
    }

    pub fn publish(&self, e: Event) {
        for f in self.subs.lock().values() {
            f(&e);
        }
    }
}
