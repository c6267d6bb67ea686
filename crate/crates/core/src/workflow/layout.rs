use std::path::{Path, PathBuf};

use crate::provenance::RunId;
use crate::toymodel::IcbcSource;

/// File layout of one run under the data directory. Paths stored in task
/// rows are relative to the data directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    data_dir: PathBuf,
    run_id: RunId,
}

impl RunLayout {
    pub fn new(data_dir: &Path, run_id: RunId) -> Self {
        Self {
            data_dir: data_dir.to_path_buf(),
            run_id,
        }
    }

    pub fn rel_root(&self) -> String {
        format!("runs/{}", self.run_id)
    }

    pub fn root(&self) -> PathBuf {
        self.data_dir.join(self.rel_root())
    }

    pub fn abs(&self, rel: &str) -> PathBuf {
        self.data_dir.join(rel)
    }

    pub fn wps_namelist(&self) -> String {
        format!("{}/wps/namelist.wps.json", self.rel_root())
    }

    pub fn geogrid(&self) -> String {
        format!("{}/wps/geo.pwa", self.rel_root())
    }

    pub fn icbc(&self, source: IcbcSource) -> String {
        format!("{}/icbc/{}.icbc", self.rel_root(), source.name())
    }

    pub fn ungrib(&self) -> String {
        format!("{}/wps/ungrib.pwa", self.rel_root())
    }

    pub fn metgrid(&self) -> String {
        format!("{}/metgrid/met.pwa", self.rel_root())
    }

    pub fn prc_namelist(&self) -> String {
        format!("{}/prc/namelist.input.json", self.rel_root())
    }

    pub fn real(&self) -> String {
        format!("{}/prc/init.pwa", self.rel_root())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.root().join("out")
    }

    pub fn task_log(&self) -> PathBuf {
        self.root().join("task.log")
    }
}
