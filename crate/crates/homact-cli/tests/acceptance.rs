//! Acceptance run: one PASS/FAIL line per criterion on the default
//! configuration, each against its time limit.

use std::process::Command;
use std::time::{Duration, Instant};

use homact::harness::suite::*;
use homact::harness::RunConfig;

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Option<u64>,
    run: fn(&RunConfig) -> Result<Vec<InvariantReport>, String>,
    /// Extra condition on the reports, beyond every invariant passing.
    expect: fn(&[InvariantReport]) -> Result<(), String>,
}

fn ok(_: &[InvariantReport]) -> Result<(), String> {
    Ok(())
}

fn instances(n: usize) -> impl Fn(&[InvariantReport]) -> Result<(), String> {
    move |rs| {
        let got: usize = rs.iter().map(|r| r.instances).sum();
        if got >= n {
            Ok(())
        } else {
            Err(format!("{got} instances, expected at least {n}"))
        }
    }
}

fn one(r: InvariantReport) -> Result<Vec<InvariantReport>, String> {
    Ok(vec![r])
}

fn verify_twice(_: &RunConfig) -> Result<Vec<InvariantReport>, String> {
    let bin = env!("CARGO_BIN_EXE_homact");
    let run = || {
        Command::new(bin)
            .args(["verify", "--suite", "all"])
            .env_remove("HOMACT_BUDGET")
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    if a.stdout.is_empty() {
        return Err(format!("empty report; stderr: {}", String::from_utf8_lossy(&a.stderr)));
    }
    if a.stdout != b.stdout {
        return Err("the two reports differ".into());
    }
    if a.status.code() != Some(0) {
        return Err(format!("verify exited with {:?}", a.status.code()));
    }
    Ok(vec![])
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            name: "property (R) on all disjoint U, V inside {0..11}",
            limit: Some(60),
            run: |c| one(check_property_r(c)),
            expect: |rs| instances(531_441)(rs),
        },
        Criterion {
            id: 2,
            name: "limit witnesses z = U or z = {x} from a 3-vertex seed",
            limit: Some(10),
            run: |c| one(check_limit_property_r(c)),
            expect: |rs| instances(59_049)(rs),
        },
        Criterion {
            id: 3,
            name: "back-and-forth on 100 random partial isomorphisms",
            limit: Some(30),
            run: |c| one(check_extend(c)),
            expect: |rs| instances(100)(rs),
        },
        Criterion {
            id: 4,
            name: "equivariant extension for Σ = Z/2 in Z/2 * Z/3",
            limit: Some(60),
            run: |c| one(check_equivariant_extend(c)),
            expect: |rs| instances(25)(rs),
        },
        Criterion {
            id: 5,
            name: "fixed-point formula on edgeless seeds with at most 4 vertices",
            limit: Some(5),
            run: |c| one(check_fixed_points(c)),
            expect: ok,
        },
        Criterion {
            id: 6,
            name: "orbit, disconnect and hcf witnesses transfer between stages",
            limit: Some(60),
            run: |c| Ok(check_preservation(c)),
            expect: |rs| instances(60)(rs),
        },
        Criterion {
            id: 7,
            name: "amalgam density steps on Z * Z and Z * Z/2",
            limit: Some(120),
            run: |c| Ok(check_amalgams(c)),
            expect: |rs| {
                let names: Vec<&str> = rs.iter().map(|r| r.name.as_str()).collect();
                for want in ["homogeneity[zz]", "faithfulness[zz]", "homogeneity[zc2]", "faithfulness[zc2]"] {
                    match rs.iter().find(|r| r.name == want) {
                        Some(r) if r.instances >= 20 => {}
                        _ => return Err(format!("missing 20 instances of {want} in {names:?}")),
                    }
                }
                Ok(())
            },
        },
        Criterion {
            id: 8,
            name: "HNN density steps on HNN(Z/2 * Z/3, Z/2, id)",
            limit: Some(120),
            run: |c| Ok(check_hnns(c)),
            expect: |rs| instances(30)(rs),
        },
        Criterion {
            id: 9,
            name: "12 scheduler certificates re-verify against the final α",
            limit: None,
            run: |c| check_scheduler(c).map(|r| vec![r]).ok_or_else(|| "no scheduler group".to_string()),
            expect: |rs| if rs[0].instances == 12 { Ok(()) } else { Err(format!("{} certificates", rs[0].instances)) },
        },
        Criterion {
            id: 10,
            name: "elementary extension, treezation cycles and the geodesic law",
            limit: Some(180),
            run: |c| Ok(vec![check_elementary_extension(c), check_treezation_cycles(c), check_geodesic_law(c)]),
            expect: |rs| {
                if rs[0].instances >= 50 && rs[2].instances >= 100 && rs[1].instances > 0 {
                    Ok(())
                } else {
                    Err("too few instances".into())
                }
            },
        },
        Criterion {
            id: 11,
            name: "free homogeneity step for k = 2",
            limit: Some(300),
            run: |c| one(check_free_homogeneity(c)),
            expect: |rs| instances(5)(rs),
        },
        Criterion {
            id: 12,
            name: "two `verify --suite all` runs give byte-identical reports",
            limit: None,
            run: verify_twice,
            expect: ok,
        },
    ]
}

fn main() {
    let cfg = RunConfig::default();
    let mut failed = 0;
    for c in criteria() {
        let t = Instant::now();
        let res = (c.run)(&cfg);
        let dt = t.elapsed();
        let verdict = res.and_then(|rs| {
            if let Some(r) = rs.iter().find(|r| !r.passed()) {
                return Err(format!("{} is {:?}: {:?}", r.name, r.status, r.witnesses.first()));
            }
            (c.expect)(&rs)?;
            match c.limit {
                Some(s) if dt > Duration::from_secs(s) => Err(format!("took longer than {s} s")),
                _ => Ok(rs.iter().map(|r| r.instances).sum::<usize>()),
            }
        });
        match verdict {
            Ok(0) => println!("PASS {:>2} {} ({:.2} s)", c.id, c.name, dt.as_secs_f64()),
            Ok(n) => println!("PASS {:>2} {} ({n} instances, {:.2} s)", c.id, c.name, dt.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL {:>2} {} ({:.2} s): {e}", c.id, c.name, dt.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
