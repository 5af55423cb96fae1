use std::collections::BTreeMap;

use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use blindanno::bench::auto_annotation_source;
use blindanno::dsl::{self, SyntaxDiagnostic, TokenClass};
use blindanno::interp::FunctionManifestEntry;
use blindanno::protocol::{Phase, ProtocolError, Record, RecordStatus, RecordView, Session};
use blindanno::Party;
use serde::{Deserialize, Serialize};

use crate::AppState;

/// Content longer than this is shown as a brief ending in `...`.
pub const BRIEF_LIMIT: usize = 80;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<SyntaxDiagnostic>,
    /// Record ids still lacking an annotation, per party.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub missing: BTreeMap<Party, Vec<String>>,
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: error.into(),
                diagnostics: Vec::new(),
                missing: BTreeMap::new(),
            },
        }
    }

    fn unauthorized() -> Self {
        ApiError::new(StatusCode::UNAUTHORIZED, "missing or invalid bearer token")
    }

    fn forbidden(role: Party) -> Self {
        ApiError::new(StatusCode::FORBIDDEN, format!("not permitted for party {role}"))
    }
}

impl From<ProtocolError> for ApiError {
    fn from(e: ProtocolError) -> Self {
        let status = match &e {
            ProtocolError::InvalidProgram { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ProtocolError::NotPending { .. }
            | ProtocolError::NotAnnotating
            | ProtocolError::WrongRound { .. }
            | ProtocolError::MissingAnnotations(_)
            | ProtocolError::NotFinished => StatusCode::CONFLICT,
            ProtocolError::NotAnOwner(_) => StatusCode::FORBIDDEN,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut err = ApiError::new(status, e.to_string());
        match e {
            ProtocolError::InvalidProgram { diagnostics, .. } => err.body.diagnostics = diagnostics,
            ProtocolError::MissingAnnotations(missing) => err.body.missing = missing,
            _ => {}
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn role(state: &AppState, headers: &HeaderMap) -> ApiResult<Party> {
    state.tokens.role(headers).ok_or_else(ApiError::unauthorized)
}

fn owner(state: &AppState, headers: &HeaderMap) -> ApiResult<Party> {
    match role(state, headers)? {
        Party::C => Err(ApiError::forbidden(Party::C)),
        p => Ok(p),
    }
}

fn coordinator(state: &AppState, headers: &HeaderMap) -> ApiResult<()> {
    match role(state, headers)? {
        Party::C => Ok(()),
        p => Err(ApiError::forbidden(p)),
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/progress", get(progress))
        .route("/records", get(records))
        .route("/records/{id}/auto-annotation", get(auto_annotation))
        .route("/annotations", post(annotate))
        .route("/rounds/advance", post(advance))
        .route("/export/ground-truth", get(export))
        .route("/dsl/manifest", get(manifest))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressView {
    pub round: u32,
    pub max_rounds: u32,
    pub phase: Phase,
    pub terminal: bool,
    /// Role of the caller.
    pub party: Party,
    /// Record counts: the caller's own records for an owner, both sides for the coordinator.
    pub total: usize,
    pub annotated: usize,
    pub agreed: usize,
    pub pending: usize,
    pub discarded: usize,
    pub pairs_total: usize,
    pub pairs_agreed: usize,
    pub pairs_pending: usize,
    pub pairs_discarded: usize,
}

fn progress_view(session: &Session, party: Party) -> ProgressView {
    let p = session.progress();
    let mut view = ProgressView {
        round: p.round,
        max_rounds: p.max_rounds,
        phase: p.phase,
        terminal: p.phase.is_terminal(),
        party,
        total: 0,
        annotated: 0,
        agreed: 0,
        pending: 0,
        discarded: 0,
        pairs_total: p.pairs_total,
        pairs_agreed: p.pairs_agreed,
        pairs_pending: p.pairs_pending,
        pairs_discarded: p.pairs_discarded,
    };
    for (owner, counts) in &p.records {
        if party == Party::C || party == *owner {
            view.total += counts.sampled;
            view.annotated += counts.annotated;
            view.agreed += counts.agreed;
            view.pending += counts.pending;
            view.discarded += counts.discarded;
        }
    }
    view
}

async fn progress(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Json<ProgressView>> {
    let party = role(&state, &headers)?;
    Ok(Json(state.read(|s| progress_view(s, party))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Annotated,
    Agreed,
    Discarded,
}

/// One row of an owner's task list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationTask {
    pub record_id: String,
    pub dataset: String,
    pub round: u32,
    pub status: TaskStatus,
    pub brief: String,
    pub record_content: String,
    /// Source saved for the current round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    /// Latest source from an earlier round; only from round 2 on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_program: Option<String>,
}

/// `content` itself when it fits in [`BRIEF_LIMIT`] characters, otherwise its
/// first `BRIEF_LIMIT - 3` characters followed by `...`.
pub fn brief(content: &str) -> String {
    if content.chars().count() <= BRIEF_LIMIT {
        content.to_string()
    } else {
        let mut s: String = content.chars().take(BRIEF_LIMIT - 3).collect();
        s.push_str("...");
        s
    }
}

fn task(view: RecordView, dataset: &str, round: u32, terminal: bool) -> Option<AnnotationTask> {
    let status = match view.status {
        RecordStatus::Pending if terminal => return None,
        RecordStatus::Pending if view.program.is_some() => TaskStatus::Annotated,
        RecordStatus::Pending => TaskStatus::Pending,
        RecordStatus::Agreed => TaskStatus::Agreed,
        RecordStatus::Discarded if terminal => return None,
        RecordStatus::Discarded => TaskStatus::Discarded,
    };
    Some(AnnotationTask {
        brief: brief(&view.content),
        record_id: view.id,
        dataset: dataset.to_string(),
        round,
        status,
        record_content: view.content,
        program: view.program,
        previous_program: if round > 1 { view.previous_program } else { None },
    })
}

async fn records(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Json<Vec<AnnotationTask>>> {
    let party = owner(&state, &headers)?;
    let name = state.dataset_name(party).to_string();
    let rows = state.read(|s| -> Result<_, ProtocolError> {
        let terminal = s.phase().is_terminal();
        let round = s.round();
        Ok(s.records(party)?
            .into_iter()
            .filter_map(|v| task(v, &name, round, terminal))
            .collect::<Vec<_>>())
    })?;
    Ok(Json(rows))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoAnnotation {
    pub record_id: String,
    pub source: String,
}

async fn auto_annotation(
    State(state): State<AppState>,
    headers: HeaderMap,
    Path(id): Path<String>,
) -> ApiResult<Json<AutoAnnotation>> {
    let party = owner(&state, &headers)?;
    let record: Option<Record> = state.read(|s| {
        let sampled = s.sampled_ids(party).ok()?;
        if !sampled.contains(&id) {
            return None;
        }
        s.dataset(party).ok()?.get(&id).cloned()
    });
    let record = record.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no record `{id}`")))?;
    let source = auto_annotation_source(&record).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(Json(AutoAnnotation { record_id: id, source }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub record_id: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationAccepted {
    pub record_id: String,
    pub round: u32,
    /// Non-fatal diagnostics, such as statements after the first `ret`.
    pub warnings: Vec<SyntaxDiagnostic>,
}

async fn annotate(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<AnnotationRequest>,
) -> ApiResult<Json<AnnotationAccepted>> {
    let party = owner(&state, &headers)?;
    let (round, warnings) = state.write(|s| {
        let round = s.round();
        let warnings = s.put_annotation(party, round, &req.record_id, &req.source)?;
        Ok((round, warnings))
    })?;
    Ok(Json(AnnotationAccepted {
        record_id: req.record_id,
        round,
        warnings,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvanceSummary {
    /// The round that was just evaluated.
    pub round: u32,
    pub newly_agreed: usize,
    pub agreed_total: usize,
    pub pending_pairs: usize,
    pub phase: Phase,
    pub terminal: bool,
    /// Whether `/export/ground-truth` now answers.
    pub export_available: bool,
}

async fn advance(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Json<AdvanceSummary>> {
    coordinator(&state, &headers)?;
    let summary = state.write(|s| {
        let out = s.run_round()?;
        if s.phase().is_terminal() {
            s.finalize()?;
        }
        Ok(AdvanceSummary {
            round: out.round,
            newly_agreed: out.newly_agreed.len(),
            agreed_total: out.agreed_total,
            pending_pairs: out.pending.len(),
            phase: s.phase(),
            terminal: s.phase().is_terminal(),
            export_available: s.ground_truth().is_some(),
        })
    })?;
    Ok(Json(summary))
}

async fn export(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Response> {
    coordinator(&state, &headers)?;
    let csv = state.read(|s| s.ground_truth().map(|g| g.to_csv()));
    let csv = match csv {
        Some(csv) => csv,
        None if state.read(|s| s.phase().is_terminal()) => state.write(|s| s.finalize())?.to_csv(),
        None => return Err(ProtocolError::NotFinished.into()),
    };
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

#[derive(Debug, Clone, Serialize)]
pub struct DslManifest {
    pub functions: Vec<FunctionManifestEntry>,
    pub tokens: Vec<TokenClass>,
    pub grammar: &'static str,
}

async fn manifest(State(state): State<AppState>, headers: HeaderMap) -> ApiResult<Json<DslManifest>> {
    role(&state, &headers)?;
    let functions = state.read(|s| s.registry().manifest());
    Ok(Json(DslManifest {
        functions,
        tokens: dsl::token_manifest(),
        grammar: dsl::GRAMMAR_EBNF,
    }))
}
