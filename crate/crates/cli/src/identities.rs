//! The model-structure identity suite, evaluated in exact rational arithmetic.

use serde::Serialize;
use spin7flow::g2spin7::{assoc_4form, build_big_phi, build_phi, SevenClass};
use spin7flow::stable::{assoc_j, assoc_metric, j_star_rho, model, ModelPair, StructureKind};
use spin7flow::{KForm, Rational, Scalar, SymBilinear, Vector, VolumeForm};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub passed: usize,
    pub failed: usize,
    pub entries: Vec<IdentityResult>,
}

impl IdentityReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }

    pub fn get(&self, name: &str) -> Option<&IdentityResult> {
        self.entries.iter().find(|e| e.name == name)
    }
}

type Check = Result<(bool, String), String>;

struct Suite(Vec<IdentityResult>);

impl Suite {
    fn record(&mut self, name: String, check: Check) {
        let (passed, detail) = check.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.0.push(IdentityResult { name, passed, detail });
    }

    fn equal<T: std::fmt::Debug + PartialEq>(&mut self, name: String, got: Result<T, String>, want: T) {
        let check = got.map(|g| {
            let ok = g == want;
            let detail = if ok { String::new() } else { format!("got {g:?}, expected {want:?}") };
            (ok, detail)
        });
        self.record(name, check);
    }
}

fn q(n: i64) -> Rational {
    Rational::from_i64(n)
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const FIRST6: [usize; 6] = [0, 1, 2, 3, 4, 5];
const FIRST7: [usize; 7] = [0, 1, 2, 3, 4, 5, 6];

fn short(kind: StructureKind) -> &'static str {
    kind.name()
}

/// Table per model: (g₇(e₇,e₇), sign of vol₇, signature of g₆, signature of g₈).
fn case_table(kind: StructureKind) -> (i64, i64, (usize, usize), (usize, usize)) {
    match kind {
        StructureKind::Su3 => (1, 1, (6, 0), (8, 0)),
        StructureKind::Su12 => (1, 1, (2, 4), (4, 4)),
        StructureKind::Sl3r => (-1, -1, (3, 3), (4, 4)),
    }
}

/// Run the suite on the given model pairs; [`verify_identities`] uses the
/// standard ones.
pub fn identity_suite(models: impl Fn(StructureKind) -> ModelPair<Rational>) -> IdentityReport {
    let mut s = Suite(Vec::new());
    let vol6 = VolumeForm::<Rational>::standard(6, q(1)).expect("volume");
    let e7 = KForm::<Rational>::from_terms(7, 1, &[(1, &[7])]);
    let e8 = KForm::<Rational>::from_terms(8, 1, &[(1, &[8])]);

    let su3 = models(StructureKind::Su3);
    s.equal(
        "metric: SU(3) model is Euclidean".into(),
        assoc_metric(&su3.omega, &su3.rho).map_err(err),
        SymBilinear::euclidean(6),
    );
    let j_image = |m: &ModelPair<Rational>| {
        assoc_j(&m.rho, &vol6)
            .map(|j| j.apply(&Vector::basis(6, 0)))
            .map_err(err)
    };
    s.equal("J: SU(3) model sends e1 to -e2".into(), j_image(&su3), Vector::basis(6, 1).scale(q(-1)));
    s.equal(
        "J: SL(3,R) model sends e1 to e2".into(),
        j_image(&models(StructureKind::Sl3r)),
        Vector::basis(6, 1),
    );
    let diagonals = [
        (StructureKind::Su12, "(-,-,-,-,+,+)", [-1, -1, -1, -1, 1, 1]),
        (StructureKind::Sl3r, "(+,-,+,-,+,-)", [1, -1, 1, -1, 1, -1]),
    ];
    for (kind, label, signs) in diagonals {
        let m = models(kind);
        let want = SymBilinear::diagonal(&signs.map(q));
        s.equal(
            format!("metric: {} model is diag{label}", short(kind)),
            assoc_metric(&m.omega, &m.rho).map_err(err),
            want,
        );
    }

    for kind in StructureKind::ALL {
        let m = models(kind);
        let name = short(kind);
        let (g77, vol_sign, sig6, sig8) = case_table(kind);
        s.equal(
            format!("signature: g6 of {name} is {sig6:?}"),
            assoc_metric(&m.omega, &m.rho)
                .map(|g| {
                    let sg = g.signature();
                    (sg.positive, sg.negative)
                })
                .map_err(err),
            sig6,
        );
        s.equal(
            format!("compatibility: omega ^ rho = 0 for {name}"),
            m.omega.wedge(&m.rho).map(|w| w.is_zero()).map_err(err),
            true,
        );
        let normalization = (|| -> Result<bool, String> {
            let jr = j_star_rho(&m.omega, &m.rho).map_err(err)?;
            let cube = m.omega.wedge(&m.omega).and_then(|w| w.wedge(&m.omega)).map_err(err)?;
            Ok(jr.wedge(&m.rho).map_err(err)? == cube.scale(Rational::new(2, 3)))
        })();
        s.equal(format!("normalization: J*rho ^ rho = 2/3 omega^3 for {name}"), normalization, true);

        let seven = build_phi(&m.omega, &m.rho, &e7).map_err(err);
        let seven = match seven {
            Ok(x) => x,
            Err(e) => {
                s.record(format!("seven-dimensional structure for {name}"), Err(e));
                continue;
            }
        };
        let want_class = if kind == StructureKind::Su3 { SevenClass::G2 } else { SevenClass::G2Star };
        s.equal(format!("class: phi from {name} is {}", want_class.name()), Ok(seven.class), want_class);
        s.equal(
            format!("vol7 = {}e1234567 for {name}", if vol_sign > 0 { "+" } else { "-" }),
            Ok(seven.vol7.coefficient()),
            q(vol_sign),
        );
        let quarter = (|| -> Result<KForm<Rational>, String> {
            let jr = j_star_rho(&m.omega, &m.rho).map_err(err)?.embed(7, &FIRST6).map_err(err)?;
            let rho7 = m.rho.embed(7, &FIRST6).map_err(err)?;
            Ok(jr
                .wedge(&rho7)
                .and_then(|x| x.wedge(&e7))
                .map_err(err)?
                .scale(Rational::new(i128::from(vol_sign), 4)))
        })();
        s.equal(
            format!("vol7 = {}1/4 J*rho ^ rho ^ e7 for {name}", if vol_sign > 0 { "+" } else { "-" }),
            quarter,
            seven.vol7.form().clone(),
        );
        let closed = (|| -> Result<KForm<Rational>, String> {
            let jr = j_star_rho(&m.omega, &m.rho).map_err(err)?.embed(7, &FIRST6).map_err(err)?;
            let om7 = m.omega.embed(7, &FIRST6).map_err(err)?;
            let half = om7.wedge(&om7).map_err(err)?.scale(Rational::new(1, 2));
            Ok(e7.wedge(&jr).map_err(err)?.add(&half).scale(q(vol_sign)))
        })();
        s.equal(
            format!("star phi = {}(e7 ^ J*rho + 1/2 omega^2) for {name}", if vol_sign > 0 { "+" } else { "-" }),
            assoc_4form(&seven).map_err(err),
            closed.unwrap_or_else(|_| KForm::zero(7, 4)),
        );
        s.equal(format!("g7(e7,e7) = {g77} for {name}"), Ok(seven.g7.get(6, 6)), q(g77));

        let eight = match build_big_phi(&seven, &e8) {
            Ok(x) => x,
            Err(e) => {
                s.record(format!("eight-dimensional structure for {name}"), Err(err(e)));
                continue;
            }
        };
        let fourteenth = eight
            .big_phi
            .wedge(&eight.big_phi)
            .map(|x| x.scale(Rational::new(1, 14)))
            .map_err(err);
        s.equal(
            format!("vol8 = 1/14 Phi ^ Phi for {name}"),
            fourteenth.clone(),
            eight.vol8.form().clone(),
        );
        let vol7_e8 = seven
            .vol7
            .form()
            .embed(8, &FIRST7)
            .and_then(|v| v.wedge(&e8))
            .map_err(err);
        let check = match (fourteenth, vol7_e8) {
            (Ok(a), Ok(b)) => {
                let ok = a == b;
                let detail = if ok {
                    String::new()
                } else if a == b.neg() {
                    "1/14 Phi ^ Phi = -vol7 ^ e8 = e8 ^ vol7".to_string()
                } else {
                    format!("1/14 Phi ^ Phi = {:?}, vol7 ^ e8 = {:?}", a.coeffs(), b.coeffs())
                };
                Ok((ok, detail))
            }
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        s.record(format!("vol8 = vol7 ^ e8 for {name}"), check);
        s.equal(format!("g8(e8,e8) = 1 for {name}"), Ok(eight.g8.get(7, 7)), q(1));
        s.equal(
            format!("signature: g8 of {name} is {sig8:?}"),
            Ok({
                let sg = eight.g8.signature();
                (sg.positive, sg.negative)
            }),
            sig8,
        );
        s.equal(
            format!("self-duality: *Phi = Phi for {name}"),
            eight.big_phi.hodge(&eight.g8, &eight.vol8).map_err(err),
            eight.big_phi.clone(),
        );
    }
    let failed = s.0.iter().filter(|e| !e.passed).count();
    IdentityReport {
        passed: s.0.len() - failed,
        failed,
        entries: s.0,
    }
}

pub fn verify_identities() -> IdentityReport {
    identity_suite(model::<Rational>)
}
