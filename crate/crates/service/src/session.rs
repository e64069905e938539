//! The live session: parameter edits, a latest-wins mailbox to one
//! optimize-and-transfer worker, and the newest published frame.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

use tokio::sync::watch;

use planehead_core::diffusion::{boundary_key, BoundaryKey};
use planehead_core::engine::Engine;
use planehead_core::geometry::Vec3;
use planehead_core::io::write_obj;
use planehead_core::lm::{LmOptions, Termination};
use planehead_core::stylize::{OptimizationState, OptimizeOptions, StyleParams};

use crate::protocol::{connectivity_hash, encode_frame, EnergyReport, GlobalParam, ProtocolMessage};

pub const DEFAULT_BUDGET: Duration = Duration::from_millis(100);

/// One fully finished (or budget-capped) optimize-and-transfer result.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub revision: u64,
    pub positions: Vec<f32>,
    pub converged: bool,
    pub report: EnergyReport,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        encode_frame(self.revision, &self.positions)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditOutcome {
    pub revision: u64,
    /// Equal values leave the parameters and the revision untouched.
    pub changed: bool,
}

/// What an edit may refer to.
#[derive(Debug, Clone)]
pub struct EditScope {
    pub k: usize,
    /// Pairs of optimized regions, which carry a style weight.
    pub style_pairs: Vec<BoundaryKey>,
    /// Every region pair sharing a border, including region 0.
    pub boundaries: Vec<BoundaryKey>,
}

impl EditScope {
    pub fn of(engine: &Engine) -> Self {
        let mut style_pairs: Vec<BoundaryKey> = engine
            .abstracted()
            .style_boundaries()
            .map(|b| boundary_key(b.regions[0], b.regions[1]))
            .collect();
        style_pairs.sort_unstable();
        let mut boundaries = engine.boundaries().to_vec();
        boundaries.sort_unstable();
        EditScope {
            k: engine.labels().k,
            style_pairs,
            boundaries,
        }
    }
}

/// Parameters after an edit, or `None` when the edit changes nothing.
pub fn apply_edit(params: &StyleParams, msg: &ProtocolMessage, scope: &EditScope) -> Result<Option<StyleParams>, String> {
    let mut next = params.clone();
    let pair = |r: [u32; 2], list: &[BoundaryKey]| {
        let key = boundary_key(r[0], r[1]);
        if list.binary_search(&key).is_ok() {
            Ok(key)
        } else {
            Err(format!("regions {} and {} share no editable boundary", r[0], r[1]))
        }
    };
    match *msg {
        ProtocolMessage::SetGlobal { param, value } => {
            let slot = match param {
                GlobalParam::LambdaD => &mut next.lambda_d,
                GlobalParam::LambdaF => &mut next.lambda_f,
                GlobalParam::LambdaA => &mut next.lambda_a,
                GlobalParam::LambdaE => &mut next.lambda_e,
                GlobalParam::LambdaV => &mut next.lambda_v,
                GlobalParam::LambdaN => &mut next.lambda_n,
                GlobalParam::Mu => &mut next.mu,
                GlobalParam::Smoothing => &mut next.smoothing,
            };
            *slot = value;
        }
        ProtocolMessage::SetEdgeWeight { regions, scale } => {
            let (i, j) = pair(regions, &scope.style_pairs)?;
            next.set_edge_scale(i, j, scale);
        }
        ProtocolMessage::SetEdgeSmoothing { regions, smoothing } => {
            let (i, j) = pair(regions, &scope.boundaries)?;
            next.set_edge_smoothing(i, j, smoothing);
        }
        ProtocolMessage::SetFacePlanarization { region, mu } => {
            if region == 0 || region as usize > scope.k {
                return Err(format!("region {region} is not an optimized region"));
            }
            next.set_region_mu(region, mu);
        }
        ProtocolMessage::ToggleLanteri { enabled } => next.lanteri = enabled,
        _ => return Err("not a parameter edit".into()),
    }
    next.validate().map_err(|e| e.to_string())?;
    Ok((next != *params).then_some(next))
}

#[derive(Debug, Clone)]
struct Job {
    revision: u64,
    params: StyleParams,
}

struct Control {
    params: StyleParams,
    revision: u64,
}

struct Shared {
    scope: EditScope,
    triangles: Vec<[u32; 3]>,
    hash: String,
    control: Mutex<Control>,
    jobs: watch::Sender<Job>,
    frames: watch::Sender<Option<Arc<Frame>>>,
    gate: Mutex<()>,
    runs: AtomicU64,
}

/// Cloneable handle to a running session.
/// The worker exits once every handle is dropped.
#[derive(Clone)]
pub struct Service {
    shared: Arc<Shared>,
}

impl Service {
    /// Starts the worker; revision 0 is computed from `params` right away.
    pub fn start(engine: Engine, params: StyleParams, budget: Duration) -> Result<Self, String> {
        params.validate().map_err(|e| e.to_string())?;
        let triangles: Vec<[u32; 3]> = engine
            .mesh()
            .triangles()
            .iter()
            .map(|t| [t[0] as u32, t[1] as u32, t[2] as u32])
            .collect();
        let (jobs, job_rx) = watch::channel(Job {
            revision: 0,
            params: params.clone(),
        });
        let (frames, _) = watch::channel(None);
        let shared = Arc::new(Shared {
            scope: EditScope::of(&engine),
            hash: connectivity_hash(&triangles),
            triangles,
            control: Mutex::new(Control { params, revision: 0 }),
            jobs,
            frames,
            gate: Mutex::new(()),
            runs: AtomicU64::new(0),
        });
        let weak = Arc::downgrade(&shared);
        std::thread::Builder::new()
            .name("stylize-worker".into())
            .spawn(move || worker(engine, job_rx, weak, budget))
            .map_err(|e| e.to_string())?;
        Ok(Service { shared })
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.shared.triangles
    }

    pub fn connectivity_hash(&self) -> &str {
        &self.shared.hash
    }

    pub fn vertex_count(&self) -> usize {
        self.shared.scope_vertex_count()
    }

    pub fn scope(&self) -> &EditScope {
        &self.shared.scope
    }

    pub fn revision(&self) -> u64 {
        self.shared.control.lock().unwrap().revision
    }

    pub fn params(&self) -> StyleParams {
        self.shared.control.lock().unwrap().params.clone()
    }

    /// Runs started for a new revision; refinement passes are not counted.
    pub fn runs(&self) -> u64 {
        self.shared.runs.load(Ordering::SeqCst)
    }

    /// Applies one edit. Accepted changes bump the revision and replace
    /// whatever job is still waiting.
    pub fn handle_edit(&self, msg: &ProtocolMessage) -> Result<EditOutcome, String> {
        let mut c = self.shared.control.lock().unwrap();
        match apply_edit(&c.params, msg, &self.shared.scope)? {
            None => Ok(EditOutcome {
                revision: c.revision,
                changed: false,
            }),
            Some(params) => {
                c.revision += 1;
                c.params = params.clone();
                let revision = c.revision;
                self.shared.jobs.send_replace(Job { revision, params });
                Ok(EditOutcome { revision, changed: true })
            }
        }
    }

    pub fn subscribe(&self) -> watch::Receiver<Option<Arc<Frame>>> {
        self.shared.frames.subscribe()
    }

    pub fn latest_frame(&self) -> Option<Arc<Frame>> {
        self.shared.frames.borrow().clone()
    }

    /// Blocks until a converged frame of at least `revision` is published.
    pub fn wait_for_revision(&self, revision: u64, timeout: Duration) -> Option<Arc<Frame>> {
        let mut rx = self.subscribe();
        let rt = tokio::runtime::Builder::new_current_thread().enable_time().build().ok()?;
        let wait = async {
            loop {
                if let Some(f) = rx.borrow_and_update().clone() {
                    if f.revision >= revision && f.converged {
                        return Some(f);
                    }
                }
                rx.changed().await.ok()?;
            }
        };
        rt.block_on(async { tokio::time::timeout(timeout, wait).await.ok().flatten() })
    }

    /// Holds the worker before its next run; edits keep queueing in the
    /// mailbox meanwhile.
    pub fn pause(&self) -> MutexGuard<'_, ()> {
        self.shared.gate.lock().unwrap()
    }

    /// Writes the newest frame as OBJ and returns its revision.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<u64, String> {
        let frame = self.latest_frame().ok_or("no frame has been computed yet")?;
        let vertices: Vec<Vec3> = frame
            .positions
            .chunks_exact(3)
            .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64))
            .collect();
        let triangles: Vec<[usize; 3]> = self
            .shared
            .triangles
            .iter()
            .map(|t| [t[0] as usize, t[1] as usize, t[2] as usize])
            .collect();
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = std::io::BufWriter::new(file);
        write_obj(&mut w, &vertices, &triangles)
            .and_then(|_| std::io::Write::flush(&mut w))
            .map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(frame.revision)
    }
}

impl Shared {
    fn scope_vertex_count(&self) -> usize {
        self.triangles.iter().flatten().map(|&i| i as usize + 1).max().unwrap_or(0)
    }
}

fn worker(mut engine: Engine, mut jobs: watch::Receiver<Job>, shared: Weak<Shared>, budget: Duration) {
    jobs.mark_changed();
    let mut warm: Option<OptimizationState> = None;
    let mut refining: Option<u64> = None;
    loop {
        let wait = refining.is_none() || jobs.has_changed().unwrap_or(false);
        if wait && futures::executor::block_on(jobs.changed()).is_err() {
            return;
        }
        let Some(shared) = shared.upgrade() else { return };
        let _gate = shared.gate.lock().unwrap();
        let job = jobs.borrow_and_update().clone();
        let same_job = refining == Some(job.revision);
        if !same_job {
            shared.runs.fetch_add(1, Ordering::SeqCst);
        }
        let lm = LmOptions {
            deadline: Some(Instant::now() + budget),
            initial_damping: match (&warm, same_job) {
                (Some(w), true) => w.damping,
                _ => LmOptions::default().initial_damping,
            },
            ..Default::default()
        };
        let opts = OptimizeOptions {
            lm,
            start: warm.as_ref().map(|w| w.positions.clone()),
        };
        match engine.stylize(&job.params, &opts) {
            Ok(out) => {
                let converged = out.state.termination != Termination::Deadline;
                let terms = engine
                    .energy_terms(&job.params, &out.state.positions)
                    .unwrap_or_default();
                let report = EnergyReport {
                    revision: job.revision,
                    energy: out.state.energy(),
                    terms,
                    iterations: out.state.iterations,
                    termination: out.state.termination,
                    degenerate_regions: out.state.degenerate_regions.clone(),
                    clamped_scales: out.clamped,
                };
                let positions = out
                    .positions
                    .iter()
                    .flat_map(|v| [v.x as f32, v.y as f32, v.z as f32])
                    .collect();
                shared.frames.send_replace(Some(Arc::new(Frame {
                    revision: job.revision,
                    positions,
                    converged,
                    report,
                })));
                refining = (!converged).then_some(job.revision);
                warm = Some(out.state);
            }
            Err(e) => {
                log::error!("revision {}: {e}", job.revision);
                refining = None;
            }
        }
    }
}
