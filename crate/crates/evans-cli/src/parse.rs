//! Small parsers: complex numbers, contour DSL, problem registry, method
//! names.

use anyhow::{anyhow, bail, Result};
use evans_core::evans::Method;
use evans_core::kato::Contour;
use evans_core::problems::{burgers_shock, constant_coefficient, convected_heat, ScalarTestbed};
use evans_core::shooting::PolarVariant;
use evans_core::{C64, Matrix64, System64};

/// Parse "0.5", "-1e-3", "0.5+0.25i", "-0.1i", "i".
pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim().replace(' ', "");
    if t.is_empty() {
        bail!("empty complex literal");
    }
    if let Ok(re) = t.parse::<f64>() {
        return Ok(C64::new(re, 0.0));
    }
    if let Some(body) = t.strip_suffix(['i', 'j']) {
        // pure imaginary or full form; find the split between re and im parts
        if body.is_empty() || body == "+" {
            return Ok(C64::new(0.0, 1.0));
        }
        if body == "-" {
            return Ok(C64::new(0.0, -1.0));
        }
        if let Ok(im) = body.parse::<f64>() {
            return Ok(C64::new(0.0, im));
        }
        // split at the last +/- that is not part of an exponent
        let bytes = body.as_bytes();
        for idx in (1..bytes.len()).rev() {
            let c = bytes[idx] as char;
            if (c == '+' || c == '-') && !matches!(bytes[idx - 1] as char, 'e' | 'E') {
                let re: f64 = body[..idx]
                    .parse()
                    .map_err(|_| anyhow!("bad real part in {:?}", s))?;
                let im_str = &body[idx..];
                let im: f64 = if im_str == "+" {
                    1.0
                } else if im_str == "-" {
                    -1.0
                } else {
                    im_str.parse().map_err(|_| anyhow!("bad imaginary part in {:?}", s))?
                };
                return Ok(C64::new(re, im));
            }
        }
        bail!("cannot parse complex literal {:?}", s);
    }
    bail!("cannot parse complex literal {:?}", s)
}

/// Contour DSL: "circle:center,radius" or "polyline:l1;l2;...".
/// `nodes` sets the number of arcs for circles and resamples polylines when
/// it exceeds the vertex count.
pub fn parse_contour(spec: &str, nodes: usize) -> Result<Contour<f64>> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("contour spec needs a kind prefix, got {:?}", spec))?;
    match kind.trim() {
        "circle" => {
            let (c, r) = body
                .rsplit_once(',')
                .ok_or_else(|| anyhow!("circle spec is circle:center,radius"))?;
            let center = parse_complex(c)?;
            let radius: f64 = r.trim().parse()?;
            Ok(Contour::circle(center, radius, nodes)?)
        }
        "polyline" => {
            let pts: Vec<C64> = body
                .split(';')
                .map(parse_complex)
                .collect::<Result<_>>()?;
            let contour = Contour::polyline(pts.clone())?;
            if nodes + 1 > pts.len() {
                Ok(contour.with_nodes(nodes)?)
            } else {
                Ok(contour)
            }
        }
        other => bail!("unknown contour kind {:?}", other),
    }
}

/// Problem registry.
///
/// Specs: "burgers" | "convected-heat:eta" | "scalar:a,b,theta"
/// | "const-diag:k;d1,d2,..." | "stiefel-demo".
pub fn parse_problem(spec: &str) -> Result<System64> {
    let (name, args) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    match name {
        "burgers" => Ok(burgers_shock()),
        "convected-heat" => {
            let eta: f64 = args
                .ok_or_else(|| anyhow!("convected-heat needs :eta"))?
                .parse()?;
            Ok(convected_heat(eta))
        }
        "scalar" => {
            let parts: Vec<f64> = args
                .ok_or_else(|| anyhow!("scalar needs :a,b,theta"))?
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()?;
            if parts.len() != 3 {
                bail!("scalar needs exactly a,b,theta");
            }
            Ok(ScalarTestbed::new(parts[0], parts[1], parts[2])?.system())
        }
        "const-diag" => {
            let body = args.ok_or_else(|| anyhow!("const-diag needs :k;d1,d2,..."))?;
            let (k_str, diag_str) = body
                .split_once(';')
                .ok_or_else(|| anyhow!("const-diag needs :k;d1,d2,..."))?;
            let k: usize = k_str.trim().parse()?;
            let entries: Vec<C64> = diag_str
                .split(',')
                .map(parse_complex)
                .collect::<Result<_>>()?;
            let a = Matrix64::diagonal(&entries);
            Ok(constant_coefficient(a, k)?)
        }
        "stiefel-demo" => {
            let a = Matrix64::from_real_rows(&[
                &[-1.0, 0.0, 0.0],
                &[0.0, -2.0, 0.0],
                &[0.0, 0.0, 3.0],
            ]);
            Ok(constant_coefficient(a, 2)?)
        }
        other => bail!(
            "unknown problem {:?} (known: burgers, convected-heat, scalar, const-diag, stiefel-demo)",
            other
        ),
    }
}

pub fn parse_method(name: &str) -> Result<Method> {
    match name.trim() {
        "exterior" => Ok(Method::ExteriorShooting),
        "polar" => Ok(Method::PolarShooting(PolarVariant::Drury)),
        "polar-davey" => Ok(Method::PolarShooting(PolarVariant::Davey)),
        "polar-bvp" => Ok(Method::PolarBvp),
        "conjugation" => Ok(Method::Conjugation),
        other => bail!(
            "unknown method {:?} (known: exterior, polar, polar-davey, polar-bvp, conjugation)",
            other
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("1e-4").unwrap(), C64::new(1e-4, 0.0));
        assert_eq!(parse_complex("0.5+0.25i").unwrap(), C64::new(0.5, 0.25));
        assert_eq!(parse_complex("-0.1i").unwrap(), C64::new(0.0, -0.1));
        assert_eq!(parse_complex("i").unwrap(), C64::new(0.0, 1.0));
        assert_eq!(parse_complex("1-2e-3i").unwrap(), C64::new(1.0, -2e-3));
        assert!(parse_complex("nonsense").is_err());
    }

    #[test]
    fn contour_specs() {
        let c = parse_contour("circle:0.5,0.25", 32).unwrap();
        assert!(c.is_closed());
        assert_eq!(c.params().len(), 33);
        let p = parse_contour("polyline:0;1;1+1i", 2).unwrap();
        assert!(!p.is_closed());
        assert!(parse_contour("blob:1,2", 8).is_err());
    }

    #[test]
    fn problem_specs() {
        assert_eq!(parse_problem("burgers").unwrap().n, 2);
        assert_eq!(parse_problem("convected-heat:2.0").unwrap().k, 1);
        assert_eq!(parse_problem("scalar:1,1,1").unwrap().n, 1);
        let sys = parse_problem("const-diag:2;-1,-2,3").unwrap();
        assert_eq!((sys.n, sys.k), (3, 2));
        assert!(parse_problem("mystery").is_err());
    }
}
