//! Weight-update rules: Adam (default) and SGD with momentum, with text
//! serialization so a run can resume bit-exactly from a checkpoint.

use std::fmt::Write as FmtWrite;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernel::{format_kernel_list, parse_kernel_list_from, Kernel};
use crate::trainer::forward::GradientSet;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        t: u64,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
    Sgd {
        lr: f64,
        momentum: f64,
        t: u64,
        velocity: Vec<Vec<f64>>,
    },
}

fn zeros_like(kernels: &[Kernel]) -> Vec<Vec<f64>> {
    kernels.iter().map(|k| vec![0.0; k.weights().len()]).collect()
}

impl Optimizer {
    pub fn adam(lr: f64, beta1: f64, beta2: f64, epsilon: f64, kernels: &[Kernel]) -> Self {
        Optimizer::Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            t: 0,
            m: zeros_like(kernels),
            v: zeros_like(kernels),
        }
    }

    pub fn sgd(lr: f64, momentum: f64, kernels: &[Kernel]) -> Self {
        Optimizer::Sgd {
            lr,
            momentum,
            t: 0,
            velocity: zeros_like(kernels),
        }
    }

    pub fn step_count(&self) -> u64 {
        match self {
            Optimizer::Adam { t, .. } => *t,
            Optimizer::Sgd { t, .. } => *t,
        }
    }

    /// Apply one update. Non-finite gradients abort with diagnostics naming
    /// the offending kernel and weight.
    pub fn step(&mut self, kernels: &mut [Kernel], grads: &GradientSet) -> Result<()> {
        if let Some((kernel, index)) = grads.find_non_finite() {
            return Err(Error::NonFiniteGradient { kernel, index });
        }
        match self {
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                t,
                m,
                v,
            } => {
                *t += 1;
                let bias1 = 1.0 - beta1.powi(*t as i32);
                let bias2 = 1.0 - beta2.powi(*t as i32);
                for (ki, kernel) in kernels.iter_mut().enumerate() {
                    let g = grads.kernel(ki);
                    let mk = &mut m[ki];
                    let vk = &mut v[ki];
                    for (i, w) in kernel.weights_mut().iter_mut().enumerate() {
                        mk[i] = *beta1 * mk[i] + (1.0 - *beta1) * g[i];
                        vk[i] = *beta2 * vk[i] + (1.0 - *beta2) * g[i] * g[i];
                        let m_hat = mk[i] / bias1;
                        let v_hat = vk[i] / bias2;
                        *w -= *lr * m_hat / (v_hat.sqrt() + *epsilon);
                    }
                }
            }
            Optimizer::Sgd {
                lr,
                momentum,
                t,
                velocity,
            } => {
                *t += 1;
                for (ki, kernel) in kernels.iter_mut().enumerate() {
                    let g = grads.kernel(ki);
                    let vel = &mut velocity[ki];
                    for (i, w) in kernel.weights_mut().iter_mut().enumerate() {
                        vel[i] = *momentum * vel[i] + g[i];
                        *w -= *lr * vel[i];
                    }
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path, kernels: &[Kernel]) -> Result<()> {
        let mut out = String::new();
        let moments_block = |state: &[Vec<f64>]| -> String {
            let wrapped: Vec<Kernel> = state
                .iter()
                .zip(kernels)
                .map(|(s, k)| Kernel::new(k.rows(), k.cols(), s.clone()).expect("moment shape"))
                .collect();
            format_kernel_list(&wrapped)
        };
        match self {
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                epsilon,
                t,
                m,
                v,
            } => {
                writeln!(out, "adam").unwrap();
                writeln!(out, "t {}", t).unwrap();
                writeln!(
                    out,
                    "hyper {:.16e} {:.16e} {:.16e} {:.16e}",
                    lr, beta1, beta2, epsilon
                )
                .unwrap();
                out.push_str(&moments_block(m));
                out.push_str(&moments_block(v));
            }
            Optimizer::Sgd {
                lr,
                momentum,
                t,
                velocity,
            } => {
                writeln!(out, "sgd").unwrap();
                writeln!(out, "t {}", t).unwrap();
                writeln!(out, "hyper {:.16e} {:.16e}", lr, momentum).unwrap();
                out.push_str(&moments_block(velocity));
            }
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let kind = lines
            .next()
            .ok_or_else(|| Error::ConfigFormat("empty optimizer state".into()))?
            .trim();
        let t_line = lines
            .next()
            .ok_or_else(|| Error::ConfigFormat("missing t line".into()))?;
        let t: u64 = t_line
            .strip_prefix("t ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::ConfigFormat(format!("bad t line '{}'", t_line)))?;
        let hyper_line = lines
            .next()
            .ok_or_else(|| Error::ConfigFormat("missing hyper line".into()))?;
        let hyper: Vec<f64> = hyper_line
            .strip_prefix("hyper ")
            .map(|s| s.split_whitespace().filter_map(|x| x.parse().ok()).collect())
            .ok_or_else(|| Error::ConfigFormat(format!("bad hyper line '{}'", hyper_line)))?;
        let unwrap_block = |kernels: Vec<Kernel>| -> Vec<Vec<f64>> {
            kernels.into_iter().map(|k| k.weights().to_vec()).collect()
        };
        match kind {
            "adam" => {
                if hyper.len() != 4 {
                    return Err(Error::ConfigFormat("adam expects 4 hyperparameters".into()));
                }
                let m = unwrap_block(parse_kernel_list_from(&mut lines)?);
                let v = unwrap_block(parse_kernel_list_from(&mut lines)?);
                Ok(Optimizer::Adam {
                    lr: hyper[0],
                    beta1: hyper[1],
                    beta2: hyper[2],
                    epsilon: hyper[3],
                    t,
                    m,
                    v,
                })
            }
            "sgd" => {
                if hyper.len() != 2 {
                    return Err(Error::ConfigFormat("sgd expects 2 hyperparameters".into()));
                }
                let velocity = unwrap_block(parse_kernel_list_from(&mut lines)?);
                Ok(Optimizer::Sgd {
                    lr: hyper[0],
                    momentum: hyper[1],
                    t,
                    velocity,
                })
            }
            other => Err(Error::ConfigFormat(format!("unknown optimizer '{}'", other))),
        }
    }
}
