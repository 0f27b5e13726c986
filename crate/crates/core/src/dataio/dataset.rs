//! On-disk dataset layout:
//!
//! ```text
//! manifest.txt
//! rgb/{0_,1_,2_}NNNN.pfm     linear HDR radiance
//! alpha/{0_,1_,2_}NNNN.pfm   opacity, one channel
//! pose/{0_,1_,2_}NNNN.txt    4x4 row-major camera-to-world
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::camera::{CameraKind, CameraPose};
use super::image::Image;
use crate::error::{Error, Result};
use crate::raymarch::{Proxy, TransmittanceModel};
use crate::shmath::ActivationKind;
use crate::vec3::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn prefix(self) -> &'static str {
        match self {
            Split::Train => "0_",
            Split::Val => "1_",
            Split::Test => "2_",
        }
    }

    pub fn from_name(name: &str) -> Option<Split> {
        Split::ALL
            .into_iter()
            .find(|s| name.starts_with(s.prefix()))
    }

    pub fn view_name(self, index: usize) -> String {
        format!("{}{index:04}", self.prefix())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    /// Maximum scene radiance: the activation range, loss scale and PSNR peak.
    pub max_radiance: f64,
    pub bbox: Aabb<f64>,
    pub camera: CameraKind,
    pub resolution: (usize, usize),
    /// Distance range covering the luminaire from every camera.
    pub near: f64,
    pub far: f64,
    pub proxy: Proxy<f64>,
    pub model: TransmittanceModel,
    pub activation: ActivationKind,
    /// Free-form description of the source field.
    pub field: String,
}

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

fn vec3(v: Vec3<f64>) -> String {
    format!("{} {} {}", num(v.x), num(v.y), num(v.z))
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "max_radiance = {}", num(self.max_radiance));
        let _ = writeln!(s, "bbox_min = {}", vec3(self.bbox.min));
        let _ = writeln!(s, "bbox_max = {}", vec3(self.bbox.max));
        match self.camera {
            CameraKind::Orthographic { width } => {
                let _ = writeln!(s, "camera = orthographic {}", num(width));
            }
            CameraKind::Perspective { focal, sensor } => {
                let _ = writeln!(s, "camera = perspective {} {}", num(focal), num(sensor));
            }
        }
        let _ = writeln!(
            s,
            "resolution = {} {}",
            self.resolution.0, self.resolution.1
        );
        let _ = writeln!(s, "near = {}", num(self.near));
        let _ = writeln!(s, "far = {}", num(self.far));
        match self.proxy {
            Proxy::Sphere { center, radius } => {
                let _ = writeln!(s, "proxy = sphere {} {}", vec3(center), num(radius));
            }
            Proxy::Box { min, max } => {
                let _ = writeln!(s, "proxy = box {} {}", vec3(min), vec3(max));
            }
        }
        let model = match self.model {
            TransmittanceModel::Linear => "linear",
            TransmittanceModel::Exponential => "exponential",
        };
        let _ = writeln!(s, "transmittance = {model}");
        let act = match self.activation {
            ActivationKind::ExtendedSigmoid { max } => format!("extended_sigmoid {}", num(max)),
            ActivationKind::Exponential => "exponential".into(),
            ActivationKind::LogSigmoid { eps } => format!("log_sigmoid {}", num(eps)),
        };
        let _ = writeln!(s, "activation = {act}");
        let _ = writeln!(s, "field = {}", self.field);
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(path, m);
        let mut kv = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", n + 1)))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| bad(format!("missing key '{k}'")))
        };
        let nums = |k: &str, n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = get(k)?
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| bad(format!("bad number in '{k}'")))
                })
                .collect::<Result<_>>()?;
            if v.len() != n {
                return Err(bad(format!("'{k}' needs {n} numbers")));
            }
            Ok(v)
        };
        let words = |k: &str| -> Result<(String, Vec<f64>)> {
            let mut it = get(k)?.split_whitespace();
            let head = it
                .next()
                .ok_or_else(|| bad(format!("empty '{k}'")))?
                .to_string();
            let rest = it
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| bad(format!("bad number in '{k}'")))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((head, rest))
        };
        let v3 = |v: &[f64]| Vec3::new(v[0], v[1], v[2]);
        let bmin = nums("bbox_min", 3)?;
        let bmax = nums("bbox_max", 3)?;
        let camera = match words("camera")? {
            (h, v) if h == "orthographic" && v.len() == 1 => {
                CameraKind::Orthographic { width: v[0] }
            }
            (h, v) if h == "perspective" && v.len() == 2 => CameraKind::Perspective {
                focal: v[0],
                sensor: v[1],
            },
            _ => return Err(bad("bad camera".into())),
        };
        let res: Vec<usize> = get("resolution")?
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| bad("bad resolution".into())))
            .collect::<Result<_>>()?;
        if res.len() != 2 || res[0] == 0 || res[1] == 0 {
            return Err(bad("bad resolution".into()));
        }
        let proxy = match words("proxy")? {
            (h, v) if h == "sphere" && v.len() == 4 => Proxy::Sphere {
                center: v3(&v),
                radius: v[3],
            },
            (h, v) if h == "box" && v.len() == 6 => Proxy::Box {
                min: v3(&v),
                max: v3(&v[3..]),
            },
            _ => return Err(bad("bad proxy".into())),
        };
        let model = match get("transmittance")? {
            "linear" => TransmittanceModel::Linear,
            "exponential" => TransmittanceModel::Exponential,
            other => return Err(bad(format!("unknown transmittance '{other}'"))),
        };
        let activation = match words("activation")? {
            (h, v) if h == "extended_sigmoid" && v.len() == 1 => {
                ActivationKind::ExtendedSigmoid { max: v[0] }
            }
            (h, v) if h == "exponential" && v.is_empty() => ActivationKind::Exponential,
            (h, v) if h == "log_sigmoid" && v.len() == 1 => {
                ActivationKind::LogSigmoid { eps: v[0] }
            }
            _ => return Err(bad("bad activation".into())),
        };
        let m = Manifest {
            max_radiance: nums("max_radiance", 1)?[0],
            bbox: Aabb::new(v3(&bmin), v3(&bmax)),
            camera,
            resolution: (res[0], res[1]),
            near: nums("near", 1)?[0],
            far: nums("far", 1)?[0],
            proxy,
            model,
            activation,
            field: get("field")?.to_string(),
        };
        if !(m.max_radiance > 0.0) || !m.bbox.has_positive_volume() || !(m.far > m.near) {
            return Err(bad("inconsistent manifest values".into()));
        }
        Ok(m)
    }
}

/// One view: pose, radiance and opacity.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    pub pose: CameraPose,
    pub rgb: Image,
    pub alpha: Image,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    /// View names per split, sorted.
    pub splits: BTreeMap<Split, Vec<String>>,
}

pub fn write_pose(path: &Path, pose: &CameraPose) -> Result<()> {
    let mut s = String::new();
    for row in pose.to_matrix() {
        let line: Vec<String> = row.iter().map(|&v| num(v)).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_pose(path: &Path, kind: CameraKind, resolution: (usize, usize)) -> Result<CameraPose> {
    let text = std::fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::format(path, "bad number in pose"))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 16 {
        return Err(Error::format(path, "pose needs 16 numbers"));
    }
    let mut m = [[0.0; 4]; 4];
    for (i, v) in vals.into_iter().enumerate() {
        m[i / 4][i % 4] = v;
    }
    CameraPose::from_matrix(&m, kind, resolution).map_err(|e| Error::format(path, e.to_string()))
}

impl Dataset {
    /// Creates the directory skeleton and manifest. Fails if `root` exists
    /// unless `force`, in which case its previous dataset content is removed.
    pub fn create(root: impl AsRef<Path>, manifest: Manifest, force: bool) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if root.exists() {
            if !force {
                return Err(Error::InvalidConfig(format!(
                    "output directory {} exists (use --force to overwrite)",
                    root.display()
                )));
            }
            for sub in ["rgb", "alpha", "pose"] {
                let p = root.join(sub);
                if p.exists() {
                    std::fs::remove_dir_all(p)?;
                }
            }
        }
        for sub in ["rgb", "alpha", "pose"] {
            std::fs::create_dir_all(root.join(sub))?;
        }
        std::fs::write(root.join("manifest.txt"), manifest.to_text())?;
        Ok(Self {
            root,
            manifest,
            splits: BTreeMap::new(),
        })
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mpath = root.join("manifest.txt");
        let text = std::fs::read_to_string(&mpath)
            .map_err(|e| Error::format(&mpath, format!("cannot read manifest: {e}")))?;
        let manifest = Manifest::parse(&text, &mpath)?;
        let mut splits: BTreeMap<Split, Vec<String>> = BTreeMap::new();
        for entry in std::fs::read_dir(root.join("pose"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            let Some(stem) = name.strip_suffix(".txt") else {
                continue;
            };
            let split = Split::from_name(stem).ok_or_else(|| {
                Error::format(
                    root.join("pose").join(&name),
                    "file name lacks a split prefix",
                )
            })?;
            splits.entry(split).or_default().push(stem.to_string());
        }
        for names in splits.values_mut() {
            names.sort();
        }
        Ok(Self {
            root,
            manifest,
            splits,
        })
    }

    pub fn views(&self, split: Split) -> &[String] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn rgb_path(&self, name: &str) -> PathBuf {
        self.root.join("rgb").join(format!("{name}.pfm"))
    }

    pub fn alpha_path(&self, name: &str) -> PathBuf {
        self.root.join("alpha").join(format!("{name}.pfm"))
    }

    pub fn pose_path(&self, name: &str) -> PathBuf {
        self.root.join("pose").join(format!("{name}.txt"))
    }

    pub fn read_pose(&self, name: &str) -> Result<CameraPose> {
        read_pose(
            &self.pose_path(name),
            self.manifest.camera,
            self.manifest.resolution,
        )
    }

    pub fn load_view(&self, name: &str) -> Result<View> {
        let pose = self.read_pose(name)?;
        let rgb = Image::load_pfm(self.rgb_path(name))?;
        let alpha = Image::load_pfm(self.alpha_path(name))?;
        let (w, h) = self.manifest.resolution;
        if rgb.width != w
            || rgb.height != h
            || rgb.channels != 3
            || alpha.width != w
            || alpha.height != h
            || alpha.channels != 1
        {
            return Err(Error::format(
                self.rgb_path(name),
                "view does not match the manifest resolution",
            ));
        }
        Ok(View {
            name: name.to_string(),
            pose,
            rgb,
            alpha,
        })
    }

    pub fn write_view(&mut self, split: Split, view: &View) -> Result<()> {
        if Split::from_name(&view.name) != Some(split) {
            return Err(Error::InvalidConfig(format!(
                "view '{}' lacks the {:?} prefix",
                view.name, split
            )));
        }
        view.rgb.save_pfm(self.rgb_path(&view.name))?;
        view.alpha.save_pfm(self.alpha_path(&view.name))?;
        write_pose(&self.pose_path(&view.name), &view.pose)?;
        let names = self.splits.entry(split).or_default();
        if !names.contains(&view.name) {
            names.push(view.name.clone());
            names.sort();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            max_radiance: 10.0,
            bbox: Aabb::centered_cube(0.8),
            camera: CameraKind::Orthographic { width: 1.7 },
            resolution: (4, 3),
            near: 0.1,
            far: 5.0,
            proxy: Proxy::Sphere {
                center: Vec3::zero(),
                radius: 0.78,
            },
            model: TransmittanceModel::Linear,
            activation: ActivationKind::ExtendedSigmoid { max: 10.0 },
            field: "analytic banded".into(),
        }
    }

    #[test]
    fn manifest_round_trip() {
        let m = manifest();
        assert_eq!(Manifest::parse(&m.to_text(), Path::new("m")).unwrap(), m);
        let mut p = m.clone();
        p.camera = CameraKind::Perspective {
            focal: 35.0,
            sensor: 36.0,
        };
        p.proxy = Proxy::Box {
            min: Vec3::splat(-1.0),
            max: Vec3::splat(1.0),
        };
        p.activation = ActivationKind::LogSigmoid { eps: 1e-3 };
        assert_eq!(Manifest::parse(&p.to_text(), Path::new("m")).unwrap(), p);
        assert!(Manifest::parse("max_radiance = 1\n", Path::new("m")).is_err());
    }

    #[test]
    fn layout_round_trip_regenerates_identical_rays() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        let m = manifest();
        let mut ds = Dataset::create(&root, m.clone(), false).unwrap();
        assert!(Dataset::create(&root, m.clone(), false).is_err());
        let pose = CameraPose::looking_at_origin(m.camera, Vec3::lit(0.3, -2.0, 1.1), m.resolution)
            .unwrap();
        let view = View {
            name: Split::Test.view_name(3),
            pose,
            rgb: Image::new(4, 3, 3),
            alpha: Image::new(4, 3, 1),
        };
        ds.write_view(Split::Test, &view).unwrap();
        let back = Dataset::open(&root).unwrap();
        assert_eq!(back.views(Split::Test), &["2_0003".to_string()]);
        assert!(back.views(Split::Train).is_empty());
        let v = back.load_view("2_0003").unwrap();
        assert_eq!(v, view);
        assert_eq!(v.pose.generate_rays(), pose.generate_rays());
    }
}
