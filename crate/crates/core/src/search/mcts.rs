use std::time::Instant;

use rand::Rng;
use rand_distr::{Dirichlet, Distribution};
use serde::{Deserialize, Serialize};

use crate::chess::{GameStatus, Move, Position};
use crate::model::{EvalSession, Prediction};
use crate::tokens::{TokenId, Vocab};

use super::budget::{adaptive_budget, kl_strength};
use super::policy::regularized_policy;
use super::SearchError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub c_puct: f64,
    /// Rollouts per predicted second in adaptive mode.
    pub c_time: f64,
    pub c_kl: f64,
    /// Budget when not adaptive.
    pub fixed_budget: usize,
    pub adaptive: bool,
    /// Budget at which adaptive mode matches the fixed-mode strength.
    pub reference_budget: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Root noise as (alpha, epsilon).
    pub dirichlet: Option<(f64, f64)>,
    /// Play the argmax of the root policy instead of sampling it.
    pub greedy: bool,
    /// Root visit counts replace the priors in the KL anchor from this
    /// budget on.
    pub visit_prior_min: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            c_puct: 1.5,
            c_time: 5.0,
            c_kl: 1.0,
            fixed_budget: 50,
            adaptive: false,
            reference_budget: 50,
            n_min: 1,
            n_max: 800,
            dirichlet: None,
            greedy: false,
            visit_prior_min: 20,
        }
    }
}

impl SearchParams {
    pub fn fixed(budget: usize) -> Self {
        SearchParams {
            fixed_budget: budget,
            ..Default::default()
        }
    }

    pub fn adaptive(c_time: f64) -> Self {
        SearchParams {
            adaptive: true,
            c_time,
            ..Default::default()
        }
    }

    /// Simulations to run given the root's predicted think time.
    pub fn budget(&self, t_pred: f64) -> usize {
        if self.adaptive {
            adaptive_budget(t_pred, self.c_time, self.n_min, self.n_max)
        } else {
            self.fixed_budget.max(1)
        }
    }
}

/// Root statistics for one legal move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    #[serde(rename = "move")]
    pub mv: Move,
    pub prior: f64,
    pub visits: u32,
    /// Mean value for the side to move at the root.
    pub q: f64,
    pub pi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub entries: Vec<RootEntry>,
    pub chosen: Move,
    /// Simulations performed, the root expansion included.
    pub n_sim: usize,
    pub planned: usize,
    pub lambda: f64,
    /// Network value of the root for the side to move.
    pub root_value: f64,
    pub predicted_time: f64,
    pub used_visit_prior: bool,
}

impl SearchResult {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("search result serializes")
    }

    pub fn visit_total(&self) -> u32 {
        self.entries.iter().map(|e| e.visits).sum()
    }
}

struct Node {
    mv: Move,
    token: TokenId,
    prior: f64,
    visits: u32,
    /// Value sum for the player who made `mv`.
    value_sum: f64,
    /// Exact value for the player who made `mv`, when the move ends the game.
    terminal: Option<f64>,
    /// Network value of this node's position for its side to move.
    eval: f64,
    children: Option<(u32, u32)>,
}

impl Node {
    fn q(&self, fallback: f64) -> f64 {
        match (self.terminal, self.visits) {
            (Some(v), _) => v,
            (None, 0) => fallback,
            (None, n) => self.value_sum / n as f64,
        }
    }
}

/// Exact value for the player who just moved into `pos`.
fn terminal_value(pos: &Position) -> Option<f64> {
    match pos.game_status() {
        GameStatus::Ongoing => None,
        // The side to move is mated, so the mover won.
        GameStatus::Checkmate { .. } => Some(1.0),
        _ => Some(0.0),
    }
}

/// Side-to-move value from a white-perspective prediction.
fn side_value(pred: &Prediction, pos: &Position) -> f64 {
    let v = pred.value as f64 * pos.side_to_move().sign() as f64;
    if v.is_finite() {
        v.clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Legal moves with their tokens and renormalized priors. Falls back to a
/// uniform prior when the network puts no finite mass on legal moves.
fn legal_priors(pred: &Prediction, pos: &Position) -> Vec<(Move, TokenId, f64)> {
    let vocab = Vocab::get();
    let mut out: Vec<(Move, TokenId, f64)> = pos
        .legal_moves()
        .into_iter()
        .map(|m| {
            let id = vocab.move_id(m).expect("every legal move is in the vocabulary");
            let p = pred.policy.get(id as usize).copied().unwrap_or(0.0) as f64;
            (m, id, if p.is_finite() && p > 0.0 { p } else { 0.0 })
        })
        .collect();
    let total: f64 = out.iter().map(|e| e.2).sum();
    let n = out.len() as f64;
    for e in &mut out {
        e.2 = if total > 0.0 { e.2 / total } else { 1.0 / n };
    }
    out
}

struct Tree {
    nodes: Vec<Node>,
    root_visits: u32,
}

impl Tree {
    fn expand(&mut self, parent: Option<usize>, pos: &Position, pred: &Prediction) -> f64 {
        let eval = side_value(pred, pos);
        let start = self.nodes.len() as u32;
        for (mv, token, prior) in legal_priors(pred, pos) {
            let terminal = terminal_value(&pos.play(mv));
            self.nodes.push(Node {
                mv,
                token,
                prior,
                visits: 0,
                value_sum: 0.0,
                terminal,
                eval: 0.0,
                children: None,
            });
        }
        let range = Some((start, self.nodes.len() as u32));
        if let Some(p) = parent {
            self.nodes[p].children = range;
            self.nodes[p].eval = eval;
        }
        eval
    }

    fn select(&self, range: (u32, u32), parent_visits: u32, parent_eval: f64, c_puct: f64) -> usize {
        // A move that wins on the spot is a proven best move; exploring its
        // siblings cannot change the node's value.
        let children = range.0 as usize..range.1 as usize;
        if let Some(i) = children.clone().find(|&i| self.nodes[i].terminal == Some(1.0)) {
            return i;
        }
        let sqrt_n = (parent_visits as f64).sqrt();
        let mut best = range.0 as usize;
        let mut best_score = f64::NEG_INFINITY;
        for i in children {
            let n = &self.nodes[i];
            let u = c_puct * n.prior * sqrt_n / (1.0 + n.visits as f64);
            let score = n.q(parent_eval) + u;
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        best
    }
}

/// Run a search from `root`, whose game history is carried by the position
/// and whose token prefix is committed in `session`. `root_pred` is the
/// network output at the root and counts as the first simulation.
pub fn run_mcts<S: EvalSession, R: Rng + ?Sized>(
    session: &mut S,
    root: &Position,
    root_pred: &Prediction,
    params: &SearchParams,
    deadline: Option<Instant>,
    rng: &mut R,
) -> Result<SearchResult, SearchError> {
    if !root.has_legal_move() {
        return Err(SearchError::NoLegalMoves);
    }
    let planned = params.budget(root_pred.time as f64);
    let mut tree = Tree {
        nodes: Vec::new(),
        root_visits: 1,
    };
    let root_value = tree.expand(None, root, root_pred);
    let root_range = (0u32, tree.nodes.len() as u32);

    if let Some((alpha, eps)) = params.dirichlet {
        let n = root_range.1 as usize;
        if n >= 2 && alpha > 0.0 {
            let noise = Dirichlet::new(&vec![alpha; n]).map_err(|e| SearchError::Config(e.to_string()))?;
            for (node, x) in tree.nodes.iter_mut().zip(noise.sample(rng)) {
                node.prior = (1.0 - eps) * node.prior + eps * x;
            }
        }
    }

    let mut path: Vec<usize> = Vec::new();
    let mut tokens: Vec<TokenId> = Vec::new();
    while (tree.root_visits as usize) < planned {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
        path.clear();
        tokens.clear();
        let mut pos = root.clone();
        let (mut range, mut parent_visits, mut parent_eval) = (root_range, tree.root_visits, root_value);
        let leaf_value = loop {
            let i = tree.select(range, parent_visits, parent_eval, params.c_puct);
            path.push(i);
            tokens.push(tree.nodes[i].token);
            pos = pos.play(tree.nodes[i].mv);
            let node = &tree.nodes[i];
            if let Some(v) = node.terminal {
                break v;
            }
            match node.children {
                Some(r) => {
                    range = r;
                    parent_visits = node.visits;
                    parent_eval = node.eval;
                }
                None => {
                    let pred = session.predict(&tokens);
                    // Value for the player who moved into the leaf.
                    break -tree.expand(Some(i), &pos, &pred);
                }
            }
        };
        let mut v = leaf_value;
        for &i in path.iter().rev() {
            let n = &mut tree.nodes[i];
            n.visits += 1;
            n.value_sum += v;
            v = -v;
        }
        tree.root_visits += 1;
    }

    let n_sim = tree.root_visits as usize;
    let lambda = kl_strength(params.c_kl, n_sim, params.adaptive, params.reference_budget);
    let children = &tree.nodes[root_range.0 as usize..root_range.1 as usize];
    let used_visit_prior = n_sim >= params.visit_prior_min && children.iter().any(|c| c.visits > 0);
    let anchor: Vec<f64> = if used_visit_prior {
        children.iter().map(|c| c.visits as f64).collect()
    } else {
        children.iter().map(|c| c.prior).collect()
    };
    let q: Vec<f64> = children.iter().map(|c| c.q(root_value)).collect();
    let pi = regularized_policy(&q, &anchor, lambda).pi;

    let chosen_idx = if params.greedy {
        (0..pi.len()).max_by(|&a, &b| pi[a].total_cmp(&pi[b])).unwrap()
    } else {
        let mut x: f64 = rng.gen();
        // Rounding can leave x past the end; fall back to the last entry
        // with positive mass.
        let mut idx = pi.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (i, &p) in pi.iter().enumerate() {
            if p > 0.0 && x < p {
                idx = i;
                break;
            }
            x -= p;
        }
        idx
    };

    let entries = children
        .iter()
        .zip(&pi)
        .zip(&q)
        .map(|((c, &p), &qv)| RootEntry {
            mv: c.mv,
            prior: c.prior,
            visits: c.visits,
            q: qv,
            pi: p,
        })
        .collect();
    Ok(SearchResult {
        entries,
        chosen: children[chosen_idx].mv,
        n_sim,
        planned,
        lambda,
        root_value,
        predicted_time: root_pred.time as f64,
        used_visit_prior,
    })
}
