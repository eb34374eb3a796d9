//! Explicit embedded Runge–Kutta pairs for autonomous systems on `ℝ⁴`.
//!
//! `Dop853` is the Dormand–Prince 8(5,3) pair with Hairer's combined error
//! estimate; `Rkf45` is the Runge–Kutta–Fehlberg 4(5) pair propagating the
//! fourth-order solution.

pub type State = [f64; 4];

/// Integration scheme, identified by its propagated order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dop853,
    Rkf45,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::Dop853 => 8,
            Method::Rkf45 => 4,
        }
    }

    pub fn from_order(order: u32) -> Option<Self> {
        match order {
            8 => Some(Method::Dop853),
            4 => Some(Method::Rkf45),
            _ => None,
        }
    }

    /// Exponent used by the step-size controller.
    pub(crate) fn controller_exponent(self) -> f64 {
        match self {
            Method::Dop853 => 1.0 / 8.0,
            Method::Rkf45 => 1.0 / 5.0,
        }
    }
}

#[inline]
fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        let s = c * h;
        for i in 0..4 {
            out[i] += s * k[i];
        }
    }
    out
}

#[inline]
fn scale(atol: f64, rtol: f64, a: f64, b: f64) -> f64 {
    atol + rtol * a.abs().max(b.abs())
}

/// One step of size `h` from `y` (with `k1 = f(y)`). Returns the new state
/// and the scaled error norm; the step is acceptable when the norm is `≤ 1`.
pub(crate) fn step<F: Fn(&State) -> State>(
    method: Method,
    f: &F,
    y: &State,
    k1: &State,
    h: f64,
    atol: f64,
    rtol: f64,
) -> (State, f64) {
    match method {
        Method::Dop853 => dop853_step(f, y, k1, h, atol, rtol),
        Method::Rkf45 => rkf45_step(f, y, k1, h, atol, rtol),
    }
}

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;
const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;
const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

fn dop853_step<F: Fn(&State) -> State>(f: &F, y: &State, k1: &State, h: f64, atol: f64, rtol: f64) -> (State, f64) {
    let k2 = f(&axpy(y, &[(A21, k1)], h));
    let k3 = f(&axpy(y, &[(A31, k1), (A32, &k2)], h));
    let k4 = f(&axpy(y, &[(A41, k1), (A43, &k3)], h));
    let k5 = f(&axpy(y, &[(A51, k1), (A53, &k3), (A54, &k4)], h));
    let k6 = f(&axpy(y, &[(A61, k1), (A64, &k4), (A65, &k5)], h));
    let k7 = f(&axpy(y, &[(A71, k1), (A74, &k4), (A75, &k5), (A76, &k6)], h));
    let k8 = f(&axpy(y, &[(A81, k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)], h));
    let k9 = f(&axpy(y, &[(A91, k1), (A94, &k4), (A95, &k5), (A96, &k6), (A97, &k7), (A98, &k8)], h));
    let k10 = f(&axpy(
        y,
        &[(A101, k1), (A104, &k4), (A105, &k5), (A106, &k6), (A107, &k7), (A108, &k8), (A109, &k9)],
        h,
    ));
    let k11 = f(&axpy(
        y,
        &[
            (A111, k1),
            (A114, &k4),
            (A115, &k5),
            (A116, &k6),
            (A117, &k7),
            (A118, &k8),
            (A119, &k9),
            (A1110, &k10),
        ],
        h,
    ));
    let y12 = axpy(
        y,
        &[
            (A121, k1),
            (A124, &k4),
            (A125, &k5),
            (A126, &k6),
            (A127, &k7),
            (A128, &k8),
            (A129, &k9),
            (A1210, &k10),
            (A1211, &k11),
        ],
        h,
    );
    let k12 = f(&y12);
    let mut incr = [0.0; 4];
    for i in 0..4 {
        incr[i] = B1 * k1[i]
            + B6 * k6[i]
            + B7 * k7[i]
            + B8 * k8[i]
            + B9 * k9[i]
            + B10 * k10[i]
            + B11 * k11[i]
            + B12 * k12[i];
    }
    let mut y_new = *y;
    let mut err = 0.0;
    let mut err2 = 0.0;
    for i in 0..4 {
        y_new[i] += h * incr[i];
        let sk = scale(atol, rtol, y[i], y_new[i]);
        let e2 = incr[i] - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
        err2 += (e2 / sk).powi(2);
        let e = ER1 * k1[i]
            + ER6 * k6[i]
            + ER7 * k7[i]
            + ER8 * k8[i]
            + ER9 * k9[i]
            + ER10 * k10[i]
            + ER11 * k11[i]
            + ER12 * k12[i];
        err += (e / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    let norm = h.abs() * err * (1.0 / (deno * 4.0)).sqrt();
    (y_new, norm)
}

const F_A21: f64 = 1.0 / 4.0;
const F_A31: f64 = 3.0 / 32.0;
const F_A32: f64 = 9.0 / 32.0;
const F_A41: f64 = 1932.0 / 2197.0;
const F_A42: f64 = -7200.0 / 2197.0;
const F_A43: f64 = 7296.0 / 2197.0;
const F_A51: f64 = 439.0 / 216.0;
const F_A52: f64 = -8.0;
const F_A53: f64 = 3680.0 / 513.0;
const F_A54: f64 = -845.0 / 4104.0;
const F_A61: f64 = -8.0 / 27.0;
const F_A62: f64 = 2.0;
const F_A63: f64 = -3544.0 / 2565.0;
const F_A64: f64 = 1859.0 / 4104.0;
const F_A65: f64 = -11.0 / 40.0;
const F_B4: [f64; 6] = [25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0];
const F_B5: [f64; 6] = [16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0];

fn rkf45_step<F: Fn(&State) -> State>(f: &F, y: &State, k1: &State, h: f64, atol: f64, rtol: f64) -> (State, f64) {
    let k2 = f(&axpy(y, &[(F_A21, k1)], h));
    let k3 = f(&axpy(y, &[(F_A31, k1), (F_A32, &k2)], h));
    let k4 = f(&axpy(y, &[(F_A41, k1), (F_A42, &k2), (F_A43, &k3)], h));
    let k5 = f(&axpy(y, &[(F_A51, k1), (F_A52, &k2), (F_A53, &k3), (F_A54, &k4)], h));
    let k6 = f(&axpy(y, &[(F_A61, k1), (F_A62, &k2), (F_A63, &k3), (F_A64, &k4), (F_A65, &k5)], h));
    let ks = [k1, &k2, &k3, &k4, &k5, &k6];
    let mut y_new = *y;
    let mut err = 0.0;
    for i in 0..4 {
        let mut lo = 0.0;
        let mut diff = 0.0;
        for (s, k) in ks.iter().enumerate() {
            lo += F_B4[s] * k[i];
            diff += (F_B5[s] - F_B4[s]) * k[i];
        }
        y_new[i] += h * lo;
        let sk = scale(atol, rtol, y[i], y_new[i]);
        err += (h * diff / sk).powi(2);
    }
    (y_new, (err / 4.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(y: &State) -> State {
        [-y[0], -2.0 * y[1], y[3], -y[2]]
    }

    fn exact(t: f64) -> State {
        [(-t).exp(), (-2.0 * t).exp(), t.sin(), t.cos()]
    }

    fn global_error(method: Method, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let mut y = exact(0.0);
        for _ in 0..n {
            let k1 = decay(&y);
            y = step(method, &decay, &y, &k1, h, 1.0, 0.0).0;
        }
        let e = exact(1.0);
        (0..4).map(|i| (y[i] - e[i]).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn weights_are_consistent() {
        let b = B1 + B6 + B7 + B8 + B9 + B10 + B11 + B12;
        assert!((b - 1.0).abs() < 1e-14);
        assert!((F_B4.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((F_B5.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let row = A121 + A124 + A125 + A126 + A127 + A128 + A129 + A1210 + A1211;
        assert!((row - 1.0).abs() < 1e-13);
        assert!((A101 + A104 + A105 + A106 + A107 + A108 + A109 - 0.6).abs() < 1e-13);
    }

    #[test]
    fn observed_orders() {
        let r8 = global_error(Method::Dop853, 4) / global_error(Method::Dop853, 8);
        assert!(r8.log2() > 7.5, "dop853 order {}", r8.log2());
        let r4 = global_error(Method::Rkf45, 16) / global_error(Method::Rkf45, 32);
        assert!(r4.log2() > 3.7 && r4.log2() < 4.5, "rkf45 order {}", r4.log2());
    }
}
