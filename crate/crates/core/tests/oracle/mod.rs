//! Naive loss implementations written straight from the formulas, with no
//! shared code with the library.

#![allow(dead_code)]

pub type Rows = Vec<Vec<f64>>;

pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

/// `-sum_i log( exp(cos(s_i,t_i)/tau) / sum_k exp(cos(s_i,u_k)/tau) )`
pub fn similarity(s: &Rows, t: &Rows, u: &Rows, tau: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len() {
        let num = (cos(&s[i], &t[i]) / tau).exp();
        let den: f64 = u.iter().map(|uk| (cos(&s[i], uk) / tau).exp()).sum();
        total -= (num / den).ln();
    }
    total
}

/// `-sum_{i != k} log( exp(cos(s_i,s_k)/tau) + exp(cos(t_i,t_k)/tau) + exp(cos(u_i,u_k)/tau) )`
pub fn intra(s: &Rows, t: &Rows, u: &Rows, tau: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len() {
        for k in 0..s.len() {
            if i != k {
                let e = (cos(&s[i], &s[k]) / tau).exp() + (cos(&t[i], &t[k]) / tau).exp() + (cos(&u[i], &u[k]) / tau).exp();
                total -= e.ln();
            }
        }
    }
    total
}

pub fn total(l_s: f64, l_i: f64, w: &[f64], lambda: f64) -> f64 {
    l_s + l_i + lambda * w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn bce(h: &[f64], p: &[f64]) -> f64 {
    let sum: f64 = h.iter().zip(p).map(|(&h, &p)| -(h * p.ln() + (1.0 - h) * (1.0 - p).ln())).sum();
    sum / h.len() as f64
}
