//! HTTP retrieval service. Requests are answered from an immutable
//! snapshot (model plus both indexes) that can be swapped atomically.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use msje_core::corpus::{tokenize, Recipe};
use msje_core::encoders::Side;
use msje_core::pipeline::MsjeModel;
use msje_core::Error as CoreError;

use crate::index::{Hit, RetrievalIndex};

pub const DEFAULT_K: usize = 10;

fn default_k() -> usize {
    DEFAULT_K
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeQuery {
    pub title: String,
    #[serde(default)]
    pub ingredients: Vec<String>,
    #[serde(default)]
    pub instructions: Vec<String>,
    #[serde(default = "default_k")]
    pub k: usize,
}

impl RecipeQuery {
    /// The query as a recipe record, tokenized like ingested text.
    pub fn to_recipe(&self) -> Recipe {
        let lines = |v: &[String]| -> Vec<Vec<String>> {
            v.iter().map(|l| tokenize(l)).filter(|t| !t.is_empty()).collect()
        };
        Recipe {
            id: "query".into(),
            title: tokenize(&self.title),
            ingredient_lines: lines(&self.ingredients),
            instructions: lines(&self.instructions),
            image_refs: Vec::new(),
        }
    }

    /// A query in the same words as a stored recipe.
    pub fn from_recipe(recipe: &Recipe, k: usize) -> Self {
        let join = |v: &[Vec<String>]| v.iter().map(|l| l.join(" ")).collect();
        Self {
            title: recipe.title.join(" "),
            ingredients: join(&recipe.ingredient_lines),
            instructions: join(&recipe.instructions),
            k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageQuery {
    pub feature: Vec<f64>,
    pub category: String,
    #[serde(default = "default_k")]
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageHit {
    pub image_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeHit {
    pub recipe_id: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results<T> {
    pub results: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_fingerprint: String,
}

#[derive(Debug, thiserror::Error)]
pub enum QueryError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Internal(String),
}

impl IntoResponse for QueryError {
    fn into_response(self) -> Response {
        let status = match self {
            QueryError::BadRequest(_) => StatusCode::BAD_REQUEST,
            QueryError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

/// Model and indexes served together.
#[derive(Debug)]
pub struct Snapshot {
    model: MsjeModel,
    fingerprint: String,
    recipes: RetrievalIndex,
    images: RetrievalIndex,
}

impl Snapshot {
    pub fn new(model: MsjeModel, recipes: RetrievalIndex, images: RetrievalIndex) -> anyhow::Result<Self> {
        anyhow::ensure!(recipes.side() == Side::Recipe, "recipe index holds image embeddings");
        anyhow::ensure!(images.side() == Side::Image, "image index holds recipe embeddings");
        let fingerprint = model.fingerprint();
        Ok(Self {
            model,
            fingerprint,
            recipes,
            images,
        })
    }

    pub fn model(&self) -> &MsjeModel {
        &self.model
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Indexes whose fingerprint differs from the loaded model's.
    pub fn stale_indexes(&self) -> Vec<Side> {
        [&self.recipes, &self.images]
            .into_iter()
            .filter(|i| i.model_fingerprint() != self.fingerprint)
            .map(RetrievalIndex::side)
            .collect()
    }

    pub fn recipe_to_image(&self, q: &RecipeQuery) -> Result<Results<ImageHit>, QueryError> {
        check_k(q.k)?;
        let recipe = q.to_recipe();
        if recipe.title.is_empty() && recipe.ingredient_lines.is_empty() && recipe.instructions.is_empty() {
            return Err(QueryError::BadRequest("recipe has no text".into()));
        }
        let emb = self.model.encode_recipe(&recipe).map_err(|e| self.classify(e, &self.images))?;
        let hits = self.search(&self.images, &emb.vector, q.k)?;
        Ok(Results {
            results: hits
                .into_iter()
                .map(|h| ImageHit {
                    image_id: h.id,
                    distance: h.distance,
                })
                .collect(),
        })
    }

    pub fn image_to_recipe(&self, q: &ImageQuery) -> Result<Results<RecipeHit>, QueryError> {
        check_k(q.k)?;
        let emb = self
            .model
            .encode_image(&q.feature, &q.category)
            .map_err(|e| self.classify(e, &self.recipes))?;
        let hits = self.search(&self.recipes, &emb.vector, q.k)?;
        Ok(Results {
            results: hits
                .into_iter()
                .map(|h| RecipeHit {
                    recipe_id: h.id,
                    distance: h.distance,
                })
                .collect(),
        })
    }

    fn search(&self, index: &RetrievalIndex, query: &[f64], k: usize) -> Result<Vec<Hit>, QueryError> {
        if index.model_fingerprint() != self.fingerprint {
            return Err(QueryError::Internal(format!(
                "{} index was built by model {}, but model {} is loaded",
                side_name(index.side()),
                index.model_fingerprint(),
                self.fingerprint
            )));
        }
        index.query_topk(query, k).map_err(|e| self.classify(e, index))
    }

    fn classify(&self, e: CoreError, index: &RetrievalIndex) -> QueryError {
        match e {
            CoreError::Empty(_) | CoreError::InvalidArgument(_) | CoreError::Parse { .. } => {
                QueryError::BadRequest(e.to_string())
            }
            e => QueryError::Internal(format!(
                "{e} (model {}, {} index built by model {})",
                self.fingerprint,
                side_name(index.side()),
                index.model_fingerprint()
            )),
        }
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Recipe => "recipe",
        Side::Image => "image",
    }
}

fn check_k(k: usize) -> Result<(), QueryError> {
    if k == 0 {
        return Err(QueryError::BadRequest("k must be at least 1".into()));
    }
    Ok(())
}

/// Shared service state; `replace` swaps the snapshot without disturbing
/// requests already holding the previous one.
#[derive(Debug)]
pub struct AppState {
    snapshot: RwLock<Arc<Snapshot>>,
}

impl AppState {
    pub fn new(snapshot: Snapshot) -> Self {
        Self {
            snapshot: RwLock::new(Arc::new(snapshot)),
        }
    }

    pub fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock poisoned").clone()
    }

    pub fn replace(&self, snapshot: Snapshot) {
        *self.snapshot.write().expect("snapshot lock poisoned") = Arc::new(snapshot);
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/recipe2image", post(recipe2image))
        .route("/image2recipe", post(image2recipe))
        .with_state(state)
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(state: Arc<AppState>, addr: SocketAddr) -> anyhow::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let bound = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(state)).await {
            eprintln!("server stopped: {e}");
        }
    });
    Ok((bound, handle))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_fingerprint: state.current().fingerprint().to_string(),
    })
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, QueryError> {
    if body.is_empty() {
        return Err(QueryError::BadRequest("empty request body".into()));
    }
    serde_json::from_slice(body).map_err(|e| QueryError::BadRequest(format!("malformed request: {e}")))
}

async fn recipe2image(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Results<ImageHit>>, QueryError> {
    let q: RecipeQuery = parse_body(&body)?;
    let snapshot = state.current();
    run_blocking(move || snapshot.recipe_to_image(&q)).await
}

async fn image2recipe(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Results<RecipeHit>>, QueryError> {
    let q: ImageQuery = parse_body(&body)?;
    let snapshot = state.current();
    run_blocking(move || snapshot.image_to_recipe(&q)).await
}

async fn run_blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, QueryError> + Send + 'static,
) -> Result<Json<T>, QueryError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| QueryError::Internal(format!("query task failed: {e}")))?
        .map(Json)
}
