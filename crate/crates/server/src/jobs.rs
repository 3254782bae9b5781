//! Background evaluation jobs, polled by id.

use std::collections::HashMap;

use dermalens_core::evalharness::EvalReport;
use parking_lot::Mutex;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobState {
    Running { total: usize },
    Done { report: Box<EvalReport> },
    Failed { error: String },
}

#[derive(Default)]
pub struct JobStore {
    jobs: Mutex<HashMap<String, JobState>>,
}

impl JobStore {
    pub fn start(&self, total: usize) -> String {
        let id = uuid::Uuid::new_v4().to_string();
        self.jobs.lock().insert(id.clone(), JobState::Running { total });
        id
    }

    pub fn finish(&self, id: &str, state: JobState) {
        self.jobs.lock().insert(id.to_string(), state);
    }

    pub fn get(&self, id: &str) -> Option<JobState> {
        self.jobs.lock().get(id).cloned()
    }
}
