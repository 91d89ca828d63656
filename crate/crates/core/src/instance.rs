//! JSON instance files: one model, optional uncertainty set, optional policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::to_json;
use crate::mdp::{check_distribution, Mdp, Policy, StateKernel};
use crate::rmdp::{SARectangularSet, SRectangularSet, UncertaintySet};

/// Raw document layout. Exactly one of `kernel`, `s_rect`, `sa_rect` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub states: usize,
    pub actions: usize,
    pub gamma: f64,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<StateKernel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_rect: Option<Vec<Vec<StateKernel>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sa_rect: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("shape mismatch in `{field}`: expected {expected}, found {found}")]
    Shape {
        field: String,
        expected: usize,
        found: usize,
    },
}

impl InstanceError {
    /// Process exit status: 2 for syntax and field errors, 3 for shapes.
    pub fn exit_code(&self) -> i32 {
        match self {
            InstanceError::Syntax { .. } | InstanceError::Field { .. } => 2,
            InstanceError::Shape { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Mdp,
    SRect,
    SaRect,
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// For uncertain instances the kernel is the first candidate everywhere.
    pub mdp: Mdp,
    pub uncertainty: Option<UncertaintySet>,
    pub policy: Option<Policy>,
    pub p0: Option<Vec<f64>>,
}

fn shape(field: impl Into<String>, expected: usize, found: usize) -> Result<(), InstanceError> {
    if expected == found {
        Ok(())
    } else {
        Err(InstanceError::Shape {
            field: field.into(),
            expected,
            found,
        })
    }
}

fn field(name: impl Into<String>, message: impl Into<String>) -> InstanceError {
    InstanceError::Field {
        field: name.into(),
        message: message.into(),
    }
}

fn stochastic(row: &[f64], name: String) -> Result<(), InstanceError> {
    check_distribution(row, &name).map_err(|e| field(name, e.to_string()))
}

impl Instance {
    pub fn from_mdp(mdp: Mdp) -> Self {
        Self {
            mdp,
            uncertainty: None,
            policy: None,
            p0: None,
        }
    }

    pub fn with_uncertainty(mdp: &Mdp, u: UncertaintySet) -> crate::Result<Self> {
        let mdp = mdp.with_kernel(u.nominal_kernel())?;
        Ok(Self {
            mdp,
            uncertainty: Some(u),
            policy: None,
            p0: None,
        })
    }

    pub fn with_policy(mut self, pi: Policy) -> Self {
        self.policy = Some(pi);
        self
    }

    pub fn kind(&self) -> InstanceKind {
        match &self.uncertainty {
            None => InstanceKind::Mdp,
            Some(UncertaintySet::S(_)) => InstanceKind::SRect,
            Some(UncertaintySet::SA(_)) => InstanceKind::SaRect,
        }
    }

    /// Uncertainty as s-rectangular candidate lists; the nominal kernel alone for plain models.
    pub fn s_rectangular(&self, cap: usize) -> crate::Result<SRectangularSet> {
        match &self.uncertainty {
            None => Ok(SRectangularSet::singleton(&self.mdp)),
            Some(u) => u.to_s_rectangular(cap),
        }
    }

    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| {
            use serde_json::error::Category;
            match e.classify() {
                Category::Syntax | Category::Eof | Category::Io => InstanceError::Syntax {
                    line: e.line(),
                    column: e.column(),
                    message: e.to_string(),
                },
                Category::Data => field("document", e.to_string()),
            }
        })?;
        Self::from_file(file)
    }

    pub fn read(path: &std::path::Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text)?)
    }

    pub fn from_file(f: InstanceFile) -> Result<Self, InstanceError> {
        let (ns, na) = (f.states, f.actions);
        if ns == 0 {
            return Err(field("states", "must be positive"));
        }
        if na == 0 {
            return Err(field("actions", "must be positive"));
        }
        shape("rewards", ns, f.rewards.len())?;
        for (s, r) in f.rewards.iter().enumerate() {
            shape(format!("rewards[{s}]"), na, r.len())?;
        }
        let present = [f.kernel.is_some(), f.s_rect.is_some(), f.sa_rect.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if present != 1 {
            return Err(field(
                "kernel",
                format!(
                    "exactly one of `kernel`, `s_rect`, `sa_rect` is required, found {present}"
                ),
            ));
        }

        let check_kernel = |k: &StateKernel, name: &str| -> Result<(), InstanceError> {
            shape(name, na, k.len())?;
            for (a, row) in k.iter().enumerate() {
                shape(format!("{name}[{a}]"), ns, row.len())?;
            }
            Ok(())
        };
        let stochastic_kernel = |k: &StateKernel, name: &str| -> Result<(), InstanceError> {
            for (a, row) in k.iter().enumerate() {
                stochastic(row, format!("{name}[{a}]"))?;
            }
            Ok(())
        };

        // all shapes first, so a shape problem is never reported as a field problem
        let mut uncertainty = None;
        let nominal: Vec<StateKernel> = if let Some(kernel) = &f.kernel {
            shape("kernel", ns, kernel.len())?;
            for (s, k) in kernel.iter().enumerate() {
                check_kernel(k, &format!("kernel[{s}]"))?;
            }
            kernel.clone()
        } else if let Some(sr) = &f.s_rect {
            shape("s_rect", ns, sr.len())?;
            for (s, cands) in sr.iter().enumerate() {
                if cands.is_empty() {
                    return Err(field(format!("s_rect[{s}]"), "empty candidate list"));
                }
                for (k, kernel) in cands.iter().enumerate() {
                    check_kernel(kernel, &format!("s_rect[{s}][{k}]"))?;
                }
            }
            sr.iter().map(|c| c[0].clone()).collect()
        } else {
            let sa = f.sa_rect.as_ref().expect("one variant is present");
            shape("sa_rect", ns, sa.len())?;
            for (s, per_action) in sa.iter().enumerate() {
                shape(format!("sa_rect[{s}]"), na, per_action.len())?;
                for (a, rows) in per_action.iter().enumerate() {
                    if rows.is_empty() {
                        return Err(field(format!("sa_rect[{s}][{a}]"), "empty candidate list"));
                    }
                    for (k, row) in rows.iter().enumerate() {
                        shape(format!("sa_rect[{s}][{a}][{k}]"), ns, row.len())?;
                    }
                }
            }
            sa.iter()
                .map(|pa| pa.iter().map(|rows| rows[0].clone()).collect())
                .collect()
        };
        if let Some(p0) = &f.p0 {
            shape("p0", ns, p0.len())?;
        }
        if let Some(pi) = &f.policy {
            shape("policy", ns, pi.len())?;
            for (s, row) in pi.iter().enumerate() {
                shape(format!("policy[{s}]"), na, row.len())?;
            }
        }

        if !(0.0..1.0).contains(&f.gamma) {
            return Err(field("gamma", format!("{} not in [0,1)", f.gamma)));
        }
        for (s, r) in f.rewards.iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(field(format!("rewards[{s}]"), "non-finite reward"));
            }
        }
        if let Some(kernel) = &f.kernel {
            for (s, k) in kernel.iter().enumerate() {
                stochastic_kernel(k, &format!("kernel[{s}]"))?;
            }
        }
        if let Some(sr) = &f.s_rect {
            for (s, cands) in sr.iter().enumerate() {
                for (k, kernel) in cands.iter().enumerate() {
                    stochastic_kernel(kernel, &format!("s_rect[{s}][{k}]"))?;
                }
            }
            let set =
                SRectangularSet::new(sr.clone()).map_err(|e| field("s_rect", e.to_string()))?;
            uncertainty = Some(UncertaintySet::S(set));
        }
        if let Some(sa) = &f.sa_rect {
            for (s, per_action) in sa.iter().enumerate() {
                for (a, rows) in per_action.iter().enumerate() {
                    for (k, row) in rows.iter().enumerate() {
                        stochastic(row, format!("sa_rect[{s}][{a}][{k}]"))?;
                    }
                }
            }
            let set =
                SARectangularSet::new(sa.clone()).map_err(|e| field("sa_rect", e.to_string()))?;
            uncertainty = Some(UncertaintySet::SA(set));
        }
        let policy = match &f.policy {
            Some(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    stochastic(row, format!("policy[{s}]"))?;
                }
                Some(Policy::new(rows.clone()).map_err(|e| field("policy", e.to_string()))?)
            }
            None => None,
        };
        let mdp = Mdp::checked(f.gamma, f.rewards.clone(), nominal)
            .map_err(|e| field("document", e.to_string()))?;
        Ok(Self {
            mdp,
            uncertainty,
            policy,
            p0: f.p0.clone(),
        })
    }

    pub fn to_file(&self) -> InstanceFile {
        let m = &self.mdp;
        let mut f = InstanceFile {
            states: m.num_states(),
            actions: m.num_actions(),
            gamma: m.gamma(),
            rewards: m.rewards().to_vec(),
            kernel: None,
            s_rect: None,
            sa_rect: None,
            p0: self.p0.clone(),
            policy: self.policy.as_ref().map(|p| p.rows().to_vec()),
        };
        match &self.uncertainty {
            None => f.kernel = Some(m.kernel().to_vec()),
            Some(UncertaintySet::S(u)) => f.s_rect = Some(u.per_state().to_vec()),
            Some(UncertaintySet::SA(u)) => f.sa_rect = Some(u.per_state_action().to_vec()),
        }
        f
    }

    /// Serialized form; parsing it back yields an equal instance.
    pub fn to_json(&self) -> String {
        to_json(&self.to_file())
    }
}
