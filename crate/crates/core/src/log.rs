//! Session logs: time series, events, and their on-disk form.
//!
//! A log is written as two files: a binary table (`*.rjlog`) and a JSON
//! sidecar (`*.json`) holding the config echo and events. The table layout is
//!
//! ```text
//! magic    8 bytes  "RJLOG\0\0\0"
//! version  u32 LE
//! columns  u32 LE, then per column: name length u16 LE + UTF-8 name
//! rows     u64 LE
//! data     rows × columns f64 LE, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

pub const LOG_MAGIC: &[u8; 8] = b"RJLOG\0\0\0";
pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// The gap sensor started reporting 1000 m to the controller.
    FailureOnset,
    /// The supervising driver noticed the automation closing in.
    HazardOnset,
    /// The supervising driver hit the brake.
    Intervention,
    /// The driver took the pedals back from the automation.
    Takeover,
    Collision { follower: usize, leader: usize },
    /// First instant after the transient with no car standing.
    JamDissipated,
    /// The last car of the initial queue started moving.
    LastLaunch,
    /// Both pedals were pressed; the accelerator was ignored.
    PedalConflict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Completed,
    Collision,
    Stopped,
}

/// Per-step ego channels.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EgoTrace {
    pub gap: Vec<f64>,
    pub speed: Vec<f64>,
    /// Gap the controller was fed (true gap, or 1000 m after the failure).
    pub gap_input: Vec<f64>,
    pub vcmd: Vec<f64>,
    /// +1 accelerate, 0 coast, −1 brake.
    pub action: Vec<f64>,
    pub target_acc: Vec<f64>,
    pub target_brake: Vec<f64>,
    pub s_acc: Vec<f64>,
    pub s_brake: Vec<f64>,
    pub pedal_acc: Vec<f64>,
    pub pedal_brake: Vec<f64>,
    pub force_acc: Vec<f64>,
    pub force_brake: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub intent: Vec<f64>,
    pub accel: Vec<f64>,
}

const EGO_COLUMNS: [&str; 16] = [
    "ego_gap",
    "ego_speed",
    "ego_gap_input",
    "ego_vcmd",
    "ego_action",
    "ego_target_acc",
    "ego_target_brake",
    "ego_s_acc",
    "ego_s_brake",
    "ego_pedal_acc",
    "ego_pedal_brake",
    "ego_force_acc",
    "ego_force_brake",
    "ego_stiffness",
    "ego_intent",
    "ego_accel",
];

impl EgoTrace {
    fn columns(&self) -> [&Vec<f64>; 16] {
        [
            &self.gap,
            &self.speed,
            &self.gap_input,
            &self.vcmd,
            &self.action,
            &self.target_acc,
            &self.target_brake,
            &self.s_acc,
            &self.s_brake,
            &self.pedal_acc,
            &self.pedal_brake,
            &self.force_acc,
            &self.force_brake,
            &self.stiffness,
            &self.intent,
            &self.accel,
        ]
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 16] {
        [
            &mut self.gap,
            &mut self.speed,
            &mut self.gap_input,
            &mut self.vcmd,
            &mut self.action,
            &mut self.target_acc,
            &mut self.target_brake,
            &mut self.s_acc,
            &mut self.s_brake,
            &mut self.pedal_acc,
            &mut self.pedal_brake,
            &mut self.force_acc,
            &mut self.force_brake,
            &mut self.stiffness,
            &mut self.intent,
            &mut self.accel,
        ]
    }
}

/// Everything recorded during one session. Row `k` holds the state at
/// `time[k]` and the control values applied over the following step.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub config: ScenarioConfig,
    pub circumference: f64,
    pub lengths: Vec<f64>,
    pub time: Vec<f64>,
    pub ego: EgoTrace,
    /// Unwrapped front positions, one series per vehicle in ring order.
    pub positions: Vec<Vec<f64>>,
    pub speeds: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub end_reason: EndReason,
}

/// JSON sidecar of a log file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMetadata {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub rows: u64,
    pub circumference: f64,
    pub lengths: Vec<f64>,
    pub end_reason: EndReason,
    pub events: Vec<Event>,
    pub config: ScenarioConfig,
}

impl SessionLog {
    pub fn new(config: ScenarioConfig, circumference: f64, lengths: Vec<f64>) -> Self {
        let n = lengths.len();
        Self {
            config,
            circumference,
            lengths,
            time: Vec::new(),
            ego: EgoTrace::default(),
            positions: vec![Vec::new(); n],
            speeds: vec![Vec::new(); n],
            events: Vec::new(),
            end_reason: EndReason::Completed,
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn vehicle_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn push_event(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    pub fn first_event(&self, pred: impl Fn(&EventKind) -> bool) -> Option<&Event> {
        self.events.iter().find(|e| pred(&e.kind))
    }

    pub fn failure_time(&self) -> Option<f64> {
        self.first_event(|k| matches!(k, EventKind::FailureOnset)).map(|e| e.t)
    }

    pub fn collided(&self) -> bool {
        self.end_reason == EndReason::Collision
    }

    /// Bumper-to-bumper gap of vehicle `i` at row `k`, from the logged positions.
    pub fn gap_at(&self, i: usize, k: usize) -> f64 {
        let n = self.vehicle_count();
        let leader = if i == 0 { n - 1 } else { i - 1 };
        let seam = if i == 0 { self.circumference } else { 0.0 };
        self.positions[leader][k] + seam - self.lengths[leader] - self.positions[i][k]
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["t".to_string()];
        names.extend(EGO_COLUMNS.iter().map(|s| s.to_string()));
        for i in 0..self.vehicle_count() {
            names.push(format!("pos_{i}"));
        }
        for i in 0..self.vehicle_count() {
            names.push(format!("speed_{i}"));
        }
        names
    }

    fn all_columns(&self) -> Vec<&Vec<f64>> {
        let mut cols = vec![&self.time];
        cols.extend(self.ego.columns());
        cols.extend(self.positions.iter());
        cols.extend(self.speeds.iter());
        cols
    }

    pub fn metadata(&self) -> LogMetadata {
        LogMetadata {
            format: "ringjam-log".into(),
            version: LOG_FORMAT_VERSION,
            seed: self.config.seed,
            rows: self.len() as u64,
            circumference: self.circumference,
            lengths: self.lengths.clone(),
            end_reason: self.end_reason,
            events: self.events.clone(),
            config: self.config.clone(),
        }
    }

    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        let names = self.column_names();
        let cols = self.all_columns();
        w.write_all(LOG_MAGIC)?;
        w.write_u32::<LittleEndian>(LOG_FORMAT_VERSION)?;
        w.write_u32::<LittleEndian>(names.len() as u32)?;
        for name in &names {
            w.write_u16::<LittleEndian>(name.len() as u16)?;
            w.write_all(name.as_bytes())?;
        }
        w.write_u64::<LittleEndian>(self.len() as u64)?;
        for k in 0..self.len() {
            for col in &cols {
                w.write_f64::<LittleEndian>(col[k])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.metadata())?)
    }

    /// Writes `<stem>.rjlog` and `<stem>.json`; returns both paths.
    pub fn save(&self, stem: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
        let stem = stem.as_ref();
        let table = stem.with_extension("rjlog");
        let meta = stem.with_extension("json");
        self.write_table(BufWriter::new(File::create(&table)?))?;
        std::fs::write(&meta, self.metadata_json()?)?;
        Ok((table, meta))
    }

    pub fn read_table<R: Read>(mut r: R, meta: LogMetadata) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != LOG_MAGIC {
            return Err(Error::MalformedLog("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != LOG_FORMAT_VERSION || meta.version != LOG_FORMAT_VERSION {
            return Err(Error::MalformedLog(format!("unsupported version {version}")));
        }
        let ncols = r.read_u32::<LittleEndian>()? as usize;
        let mut names = Vec::with_capacity(ncols);
        for _ in 0..ncols {
            let len = r.read_u16::<LittleEndian>()? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            names.push(String::from_utf8(buf).map_err(|e| Error::MalformedLog(e.to_string()))?);
        }
        let rows = r.read_u64::<LittleEndian>()? as usize;
        if rows as u64 != meta.rows {
            return Err(Error::MalformedLog("row count mismatch with sidecar".into()));
        }

        let mut log = SessionLog::new(meta.config, meta.circumference, meta.lengths);
        log.events = meta.events;
        log.end_reason = meta.end_reason;
        if names != log.column_names() {
            return Err(Error::MalformedLog("column layout mismatch".into()));
        }
        let n = log.vehicle_count();
        let mut data = vec![Vec::with_capacity(rows); ncols];
        for _ in 0..rows {
            for col in data.iter_mut() {
                col.push(r.read_f64::<LittleEndian>()?);
            }
        }
        let mut it = data.into_iter();
        log.time = it.next().unwrap_or_default();
        for col in log.ego.columns_mut() {
            *col = it.next().unwrap_or_default();
        }
        log.positions = it.by_ref().take(n).collect();
        log.speeds = it.take(n).collect();
        Ok(log)
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<Self> {
        let stem = stem.as_ref();
        let meta: LogMetadata =
            serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let file = BufReader::new(File::open(stem.with_extension("rjlog"))?);
        Self::read_table(file, meta)
    }
}
