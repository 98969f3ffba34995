//! Study measures from session logs and the nonparametric test battery.

mod stats;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::travel::{parse_log, EventKind, SessionEvent, Technique, TravelError};
use crate::visibility::MarkerSet;

pub use stats::{
    bonferroni, doubled_ranks, friedman, latin_square, mid_ranks, round3, wilcoxon_signed_rank,
    wilcoxon_with, Bonferroni, FriedmanResult, PMethod, WilcoxonMethod, WilcoxonResult,
    FRIEDMAN_EXACT_LIMIT, WILCOXON_EXACT_MAX_N,
};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error(transparent)]
    Log(#[from] TravelError),
    #[error("log must start with a start event and contain exactly one technique: {0}")]
    InvalidLog(String),
    #[error("timestamps decrease at event {0}")]
    Unordered(usize),
    #[error("log has no {0} event")]
    MissingEvent(&'static str),
    #[error("tag refers to marker {0}, which is not in the marker set")]
    UnknownMarker(u32),
    #[error("log uses marker set {log:?} but {given:?} was supplied")]
    MarkerSetMismatch { log: String, given: String },
    #[error("table row {0} is incomplete")]
    IncompleteTable(usize),
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub subject: String,
    pub technique: Technique,
    pub marker_set: String,
    pub events: Vec<SessionEvent>,
}

impl SessionLog {
    pub fn from_events(events: Vec<SessionEvent>) -> Result<Self, AnalyticsError> {
        let Some(SessionEvent {
            kind: EventKind::Start(start),
            ..
        }) = events.first()
        else {
            return Err(AnalyticsError::InvalidLog(
                "first event is not a start event".into(),
            ));
        };
        if events
            .iter()
            .skip(1)
            .any(|e| matches!(e.kind, EventKind::Start(_)))
        {
            return Err(AnalyticsError::InvalidLog(
                "more than one start event".into(),
            ));
        }
        let (subject, technique, marker_set) = (
            start.subject.clone(),
            start.technique,
            start.marker_set.clone(),
        );
        Ok(Self {
            subject,
            technique,
            marker_set,
            events,
        })
    }

    pub fn parse(text: &str) -> Result<Self, AnalyticsError> {
        Self::from_events(parse_log(text)?)
    }

    fn check_order(&self) -> Result<(), AnalyticsError> {
        match self.events.windows(2).position(|w| !(w[1].t >= w[0].t)) {
            Some(i) => Err(AnalyticsError::Unordered(i + 1)),
            None => Ok(()),
        }
    }

    /// Marker ids of tag events that matched something, in log order.
    pub fn tagged(&self) -> Vec<u32> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Tag { marker, .. } => marker,
                _ => None,
            })
            .collect()
    }
}

/// Percentage of distinct markers tagged. Repeated tags count once.
pub fn success_rate(log: &SessionLog, markers: &MarkerSet) -> Result<f64, AnalyticsError> {
    if log.marker_set != markers.id {
        return Err(AnalyticsError::MarkerSetMismatch {
            log: log.marker_set.clone(),
            given: markers.id.clone(),
        });
    }
    let known: BTreeSet<u32> = markers.markers.iter().map(|m| m.id).collect();
    let mut found = BTreeSet::new();
    for id in log.tagged() {
        if !known.contains(&id) {
            return Err(AnalyticsError::UnknownMarker(id));
        }
        found.insert(id);
    }
    if known.is_empty() {
        return Err(AnalyticsError::InvalidTable("marker set is empty".into()));
    }
    Ok(100.0 * found.len() as f64 / known.len() as f64)
}

/// Seconds from the start event to the end event.
pub fn completion_time(log: &SessionLog) -> Result<f64, AnalyticsError> {
    log.check_order()?;
    let start = log
        .events
        .first()
        .ok_or(AnalyticsError::MissingEvent("start"))?;
    let end = log
        .events
        .iter()
        .rev()
        .find(|e| matches!(e.kind, EventKind::End { .. }))
        .ok_or(AnalyticsError::MissingEvent("end"))?;
    Ok(end.t - start.t)
}

/// Subjects × techniques table of one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub measure: String,
    pub subjects: Vec<String>,
    pub techniques: Vec<Technique>,
    /// `cells[subject][technique]`; `None` where a session is missing.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl StudyTable {
    /// Complete rows as plain values, or the first incomplete row.
    pub fn complete_rows(&self) -> Result<Vec<Vec<f64>>, AnalyticsError> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .copied()
                    .collect::<Option<Vec<f64>>>()
                    .ok_or(AnalyticsError::IncompleteTable(i))
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Result<Vec<f64>, AnalyticsError> {
        Ok(self.complete_rows()?.into_iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeasures {
    pub subject: String,
    pub technique: Technique,
    pub success_rate: f64,
    pub completion_time: f64,
    pub tags: usize,
    pub distinct_markers: usize,
}

pub fn measure_session(
    log: &SessionLog,
    markers: &MarkerSet,
) -> Result<SessionMeasures, AnalyticsError> {
    let tagged = log.tagged();
    Ok(SessionMeasures {
        subject: log.subject.clone(),
        technique: log.technique,
        success_rate: success_rate(log, markers)?,
        completion_time: completion_time(log)?,
        tags: tagged.len(),
        distinct_markers: tagged.iter().collect::<BTreeSet<_>>().len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub a: Technique,
    pub b: Technique,
    pub wilcoxon: WilcoxonResult,
    pub significant: bool,
    /// Significant at the uncorrected level but not after correction.
    pub boundary: bool,
    pub report: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureAnalysis {
    pub table: StudyTable,
    pub friedman: Option<FriedmanResult>,
    pub friedman_report: Option<String>,
    pub bonferroni: Bonferroni,
    pub pairwise: Vec<PairwiseResult>,
    /// Why the tests were skipped, if they were.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub sessions: Vec<SessionMeasures>,
    pub measures: Vec<MeasureAnalysis>,
}

/// Builds a table over the techniques that occur in `sessions`, in their
/// canonical order. A repeated subject/technique pair keeps the last value.
pub fn study_table(
    sessions: &[SessionMeasures],
    measure: &str,
    value: impl Fn(&SessionMeasures) -> f64,
) -> StudyTable {
    let techniques: Vec<Technique> = sessions
        .iter()
        .map(|s| s.technique)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut by_subject: BTreeMap<&str, Vec<Option<f64>>> = BTreeMap::new();
    for s in sessions {
        let row = by_subject
            .entry(&s.subject)
            .or_insert_with(|| vec![None; techniques.len()]);
        let j = techniques
            .iter()
            .position(|t| *t == s.technique)
            .expect("technique listed");
        row[j] = Some(value(s));
    }
    StudyTable {
        measure: measure.to_string(),
        subjects: by_subject.keys().map(|s| s.to_string()).collect(),
        techniques,
        cells: by_subject.into_values().collect(),
    }
}

/// Friedman omnibus test, then all pairwise Wilcoxon tests judged against
/// the Bonferroni threshold over the number of pairs.
pub fn analyze_table(table: StudyTable, alpha: f64) -> Result<MeasureAnalysis, AnalyticsError> {
    let k = table.techniques.len();
    let pairs = (k * k.saturating_sub(1) / 2).max(1);
    let bonf = bonferroni(alpha, pairs)?;
    let rows = match table.complete_rows() {
        Ok(r) if r.len() >= 2 && k >= 2 => r,
        Ok(_) => {
            return Ok(skipped(
                table,
                bonf,
                "need at least 2 subjects and 2 techniques",
            ))
        }
        Err(e) => return Ok(skipped(table, bonf, &e.to_string())),
    };
    let f = friedman(&rows)?;
    let mut pairwise = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let a: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let b: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let w = wilcoxon_signed_rank(&a, &b)?;
            let significant = w.p <= bonf.reported;
            pairwise.push(PairwiseResult {
                a: table.techniques[i],
                b: table.techniques[j],
                boundary: !significant && w.p <= alpha,
                significant,
                report: w.report(),
                wilcoxon: w,
            });
        }
    }
    Ok(MeasureAnalysis {
        friedman_report: Some(f.report()),
        friedman: Some(f),
        table,
        bonferroni: bonf,
        pairwise,
        skipped: None,
    })
}

fn skipped(table: StudyTable, bonferroni: Bonferroni, why: &str) -> MeasureAnalysis {
    MeasureAnalysis {
        table,
        friedman: None,
        friedman_report: None,
        bonferroni,
        pairwise: Vec::new(),
        skipped: Some(why.to_string()),
    }
}

pub fn analyze_study(
    logs: &[SessionLog],
    markers: &MarkerSet,
    alpha: f64,
) -> Result<StudyReport, AnalyticsError> {
    let sessions = logs
        .iter()
        .map(|l| measure_session(l, markers))
        .collect::<Result<Vec<_>, _>>()?;
    let measures = vec![
        analyze_table(
            study_table(&sessions, "success_rate", |s| s.success_rate),
            alpha,
        )?,
        analyze_table(
            study_table(&sessions, "completion_time", |s| s.completion_time),
            alpha,
        )?,
    ];
    Ok(StudyReport { sessions, measures })
}
