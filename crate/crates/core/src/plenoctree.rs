//! Sparse octree of density + SH leaves distilled from a radiance field,
//! with front-to-back ray traversal.
//!
//! All occupied leaves live at `max_depth`; empty subtrees are collapsed.
//! Child octant index is `x | y << 1 | z << 2` (bit set = upper half).

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::RadianceSource;
use crate::io_util::{read_exact_or, LeReader, LeWriter};
use crate::raymarch::{slab_intersection, Accumulator, MarchResult, MarchSettings, Ray};
use crate::scalar::Real;
use crate::shmath::{check_degree, coeffs_per_channel, CHANNELS};
use crate::vec3::{Aabb, Vec3};

pub const OCTREE_MAGIC: &[u8; 7] = b"PLNOCT1";
pub const OCTREE_VERSION: u32 = 1;
/// Deepest tree accepted; `8^12` voxels is far beyond what extraction can
/// evaluate densely.
pub const MAX_OCTREE_DEPTH: usize = 12;

const LEAF_BIT: u32 = 1 << 31;
const EMPTY: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionConfig {
    /// Voxels whose center density is below this are dropped.
    pub prune_sigma: f64,
    /// Uniform samples averaged per surviving voxel.
    pub refine_samples: usize,
    pub max_depth: usize,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        Self {
            prune_sigma: 0.01,
            refine_samples: 256,
            max_depth: 7,
        }
    }
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prune_sigma >= 0.0)
            || self.refine_samples == 0
            || self.max_depth > MAX_OCTREE_DEPTH
        {
            return Err(Error::InvalidConfig(format!(
                "extraction needs prune_sigma >= 0, refine_samples >= 1 and max_depth <= {MAX_OCTREE_DEPTH} (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Child slot of an internal node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Child {
    Empty,
    Node(u32),
    Leaf(u32),
}

impl Child {
    fn decode(tag: u32) -> Self {
        if tag == EMPTY {
            Child::Empty
        } else if tag & LEAF_BIT != 0 {
            Child::Leaf(tag & !LEAF_BIT)
        } else {
            Child::Node(tag)
        }
    }

    fn encode(self) -> u32 {
        match self {
            Child::Empty => EMPTY,
            Child::Node(i) => i,
            Child::Leaf(i) => i | LEAF_BIT,
        }
    }
}

/// Size and shape summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctreeStats {
    pub nodes: usize,
    pub leaves: usize,
    pub max_depth: usize,
    /// SH values stored per leaf, `3 (l_max + 1)^2`.
    pub sh_payload_per_leaf: usize,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plenoctree<T> {
    bbox: Aabb<T>,
    max_depth: usize,
    l_max: usize,
    /// Breadth-first internal nodes; node 0 is the root when present.
    nodes: Vec<[u32; 8]>,
    /// Per leaf: activated density followed by the SH coefficients.
    leaves: Vec<T>,
}

enum Build<T> {
    Empty,
    Leaf(Vec<T>),
    Node(Box<[Build<T>; 8]>),
}

impl<T: Real> Plenoctree<T> {
    pub fn empty(bbox: Aabb<T>, max_depth: usize, l_max: usize) -> Result<Self> {
        check_degree(l_max)?;
        if !bbox.has_positive_volume() {
            return Err(Error::DegenerateBox(format!("{bbox:?}")));
        }
        Ok(Self {
            bbox: bbox.cubified(),
            max_depth,
            l_max,
            nodes: Vec::new(),
            leaves: Vec::new(),
        })
    }

    pub fn bbox(&self) -> Aabb<T> {
        self.bbox
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn leaf_stride(&self) -> usize {
        1 + CHANNELS * coeffs_per_channel(self.l_max)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len() / self.leaf_stride()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaf(&self, index: usize) -> &[T] {
        let s = self.leaf_stride();
        &self.leaves[index * s..(index + 1) * s]
    }

    pub fn leaf_size(&self) -> T {
        self.bbox.extent().x / T::lit((1u64 << self.max_depth) as f64)
    }

    pub fn child(&self, node: usize, octant: usize) -> Child {
        Child::decode(self.nodes[node][octant])
    }

    pub fn stats(&self) -> OctreeStats {
        let payload = CHANNELS * coeffs_per_channel(self.l_max);
        OctreeStats {
            nodes: self.node_count(),
            leaves: self.leaf_count(),
            max_depth: self.max_depth,
            sh_payload_per_leaf: payload,
            bytes: self.nodes.len() * 32 + self.leaf_count() * (1 + payload) * 4,
        }
    }

    fn root(&self) -> Child {
        if !self.nodes.is_empty() {
            Child::Node(0)
        } else if !self.leaves.is_empty() {
            Child::Leaf(0)
        } else {
            Child::Empty
        }
    }

    /// Distills `source` into an octree over its (cubified) bounding box.
    pub fn extract<S: RadianceSource<T> + ?Sized>(
        source: &S,
        cfg: &ExtractionConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let l_max = source.l_max();
        let mut tree = Self::empty(source.bbox(), cfg.max_depth, l_max)?;
        let res = 1usize << cfg.max_depth;
        // split the work at a fixed level so results do not depend on scheduling
        let split = cfg.max_depth.min(2);
        let tops: Vec<[usize; 3]> = (0..1usize << (3 * split))
            .map(|i| {
                let mut c = [0usize; 3];
                for bit in 0..split {
                    let oct = (i >> (3 * bit)) & 7;
                    for (a, cv) in c.iter_mut().enumerate() {
                        *cv |= ((oct >> a) & 1) << (split - 1 - bit);
                    }
                }
                c
            })
            .collect();
        let ctx = ExtractCtx {
            source,
            cfg,
            bbox: tree.bbox,
            res,
            stride: tree.leaf_stride(),
        };
        let built: Vec<Build<T>> = tops
            .par_iter()
            .map(|&c| {
                ctx.build(
                    split,
                    [
                        c[0] << (cfg.max_depth - split),
                        c[1] << (cfg.max_depth - split),
                        c[2] << (cfg.max_depth - split),
                    ],
                )
            })
            .collect();
        // reassemble the top `split` levels
        let root = assemble(built, split);
        tree.flatten(root);
        Ok(tree)
    }

    fn flatten(&mut self, root: Build<T>) {
        self.nodes.clear();
        self.leaves.clear();
        match root {
            Build::Empty => {}
            Build::Leaf(v) => self.leaves.extend(v),
            Build::Node(children) => {
                let mut queue = std::collections::VecDeque::new();
                self.nodes.push([EMPTY; 8]);
                queue.push_back((0usize, children));
                while let Some((index, children)) = queue.pop_front() {
                    for (octant, child) in children.into_iter().enumerate() {
                        let tag = match child {
                            Build::Empty => Child::Empty,
                            Build::Leaf(v) => {
                                let li = self.leaves.len() / self.leaf_stride();
                                self.leaves.extend(v);
                                Child::Leaf(li as u32)
                            }
                            Build::Node(grand) => {
                                let ni = self.nodes.len();
                                self.nodes.push([EMPTY; 8]);
                                queue.push_back((ni, grand));
                                Child::Node(ni as u32)
                            }
                        };
                        self.nodes[index][octant] = tag.encode();
                    }
                }
            }
        }
    }

    /// Leaf containing `p`, if occupied.
    pub fn lookup(&self, p: Vec3<T>) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let mut lo = self.bbox.min;
        let mut size = self.bbox.extent().x;
        let mut cur = self.root();
        loop {
            match cur {
                Child::Empty => return None,
                Child::Leaf(i) => return Some(i as usize),
                Child::Node(n) => {
                    size = size * T::half();
                    let mut oct = 0;
                    let mut next = lo;
                    for a in 0..3 {
                        if p[a] >= lo[a] + size {
                            oct |= 1 << a;
                            match a {
                                0 => next.x += size,
                                1 => next.y += size,
                                _ => next.z += size,
                            }
                        }
                    }
                    lo = next;
                    cur = self.child(n as usize, oct);
                }
            }
        }
    }

    /// Front-to-back accumulation over the occupied leaves the ray crosses,
    /// one sample per leaf chord.
    pub fn traverse(&self, ray: &Ray<T>, settings: &MarchSettings) -> MarchResult<T> {
        let mut acc = Accumulator::new(*settings, self.l_max, ray.dir);
        self.for_each_leaf(ray, &mut |t0, t1, leaf| {
            let leaf = self.leaf(leaf);
            acc.push((t0 + t1) * T::half(), t1 - t0, leaf[0], &leaf[1..])
        });
        acc.finish()
    }

    /// Calls `f(t_enter, t_exit, leaf)` for every occupied leaf the ray
    /// segment crosses, front to back, until `f` returns `false`.
    pub fn for_each_leaf(&self, ray: &Ray<T>, f: &mut dyn FnMut(T, T, usize) -> bool) {
        if !(ray.t_far > ray.t_near) {
            return;
        }
        let Some((t0, t1)) = slab_intersection(ray.origin, ray.dir, self.bbox.min, self.bbox.max)
        else {
            return;
        };
        let (t0, t1) = (t0.max(ray.t_near), t1.min(ray.t_far));
        if t1 > t0 {
            self.visit(
                self.root(),
                self.bbox.min,
                self.bbox.extent().x,
                t0,
                t1,
                ray,
                f,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(
        &self,
        child: Child,
        lo: Vec3<T>,
        size: T,
        t0: T,
        t1: T,
        ray: &Ray<T>,
        f: &mut dyn FnMut(T, T, usize) -> bool,
    ) -> bool {
        match child {
            Child::Empty => true,
            Child::Leaf(i) => f(t0, t1, i as usize),
            Child::Node(n) => {
                let half = size * T::half();
                let mut order: [(T, T, usize, Vec3<T>); 8] = [(T::zero(), T::zero(), 0, lo); 8];
                let mut count = 0;
                for oct in 0..8 {
                    if self.child(n as usize, oct) == Child::Empty {
                        continue;
                    }
                    let clo = Vec3::new(
                        lo.x + if oct & 1 != 0 { half } else { T::zero() },
                        lo.y + if oct & 2 != 0 { half } else { T::zero() },
                        lo.z + if oct & 4 != 0 { half } else { T::zero() },
                    );
                    let chi = clo + Vec3::splat(half);
                    if let Some((a, b)) = slab_intersection(ray.origin, ray.dir, clo, chi) {
                        let (a, b) = (a.max(t0), b.min(t1));
                        if b > a {
                            order[count] = (a, b, oct, clo);
                            count += 1;
                        }
                    }
                }
                let order = &mut order[..count];
                order.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
                for &(a, b, oct, clo) in order.iter() {
                    if !self.visit(self.child(n as usize, oct), clo, half, a, b, ray, f) {
                        return false;
                    }
                }
                true
            }
        }
    }

    pub fn cast<U: Real>(&self) -> Plenoctree<U> {
        Plenoctree {
            bbox: self.bbox.cast(),
            max_depth: self.max_depth,
            l_max: self.l_max,
            nodes: self.nodes.clone(),
            leaves: self
                .leaves
                .iter()
                .map(|v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut w = LeWriter::new(w);
        w.bytes(OCTREE_MAGIC)?;
        w.u32(OCTREE_VERSION)?;
        for v in self
            .bbox
            .min
            .to_array()
            .into_iter()
            .chain(self.bbox.max.to_array())
        {
            w.u64(v.to_f64_lossy().to_bits())?;
        }
        w.u32(self.max_depth as u32)?;
        w.u32(self.l_max as u32)?;
        w.u32(self.node_count() as u32)?;
        w.u32(self.leaf_count() as u32)?;
        for node in &self.nodes {
            for &tag in node {
                w.u32(tag)?;
            }
        }
        for &v in &self.leaves {
            w.f32(v.to_f32_lossy())?;
        }
        Ok(())
    }

    /// Reads a tree and checks that it is well formed: every child index in
    /// range, every node and leaf referenced exactly once, breadth-first order.
    pub fn read_from(r: &mut impl Read, path: &Path) -> Result<Self> {
        let mut magic = [0u8; 7];
        read_exact_or(r, &mut magic, path, "header")?;
        if &magic != OCTREE_MAGIC {
            return Err(Error::format(path, "not an octree file (bad magic)"));
        }
        let mut r = LeReader::new(r, path);
        let version = r.u32()?;
        if version != OCTREE_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported octree version {version}"),
            ));
        }
        let mut b = [0f64; 6];
        for v in &mut b {
            *v = f64::from_bits(r.u64()?);
        }
        let bbox = Aabb::new(Vec3::lit(b[0], b[1], b[2]), Vec3::lit(b[3], b[4], b[5]));
        let max_depth = r.u32()? as usize;
        let l_max = r.u32()? as usize;
        let nodes = r.u32()? as usize;
        let leaves = r.u32()? as usize;
        check_degree(l_max).map_err(|e| Error::format(path, e.to_string()))?;
        if max_depth > MAX_OCTREE_DEPTH || !bbox.has_positive_volume() || bbox.cubified() != bbox {
            return Err(Error::format(path, "invalid octree header"));
        }
        if nodes > (1 << 28)
            || leaves > (1 << 28)
            || (nodes == 0 && leaves > 1)
            || (max_depth == 0 && nodes > 0)
        {
            return Err(Error::format(path, "inconsistent node/leaf counts"));
        }
        let mut tree = Self::empty(bbox, max_depth, l_max)?;
        let mut raw = vec![0u32; nodes * 8];
        for v in &mut raw {
            *v = r.u32()?;
        }
        tree.nodes = raw
            .chunks_exact(8)
            .map(|c| c.try_into().expect("8 tags"))
            .collect();
        let mut data = vec![0f32; leaves * tree.leaf_stride()];
        r.f32_slice(&mut data)?;
        tree.leaves = data.into_iter().map(|v| T::lit(v as f64)).collect();
        tree.check_structure().map_err(|m| Error::format(path, m))?;
        Ok(tree)
    }

    fn check_structure(&self) -> std::result::Result<(), String> {
        let leaves = self.leaf_count();
        let mut next_node = 1usize;
        let mut next_leaf = 0usize;
        let mut depth_of = vec![0usize; self.nodes.len()];
        if self.nodes.is_empty() && leaves == 1 && self.max_depth != 0 {
            return Err("single-leaf tree must have depth 0".into());
        }
        for (n, node) in self.nodes.iter().enumerate() {
            if n > 0 && n >= next_node {
                return Err(format!("node {n} is not referenced by an earlier node"));
            }
            for &tag in node {
                match Child::decode(tag) {
                    Child::Empty => {}
                    Child::Node(i) => {
                        if i as usize != next_node || next_node >= self.nodes.len() {
                            return Err(format!("node {n} has an out-of-order child {i}"));
                        }
                        depth_of[next_node] = depth_of[n] + 1;
                        if depth_of[next_node] >= self.max_depth {
                            return Err("internal node at leaf depth".into());
                        }
                        next_node += 1;
                    }
                    Child::Leaf(i) => {
                        if i as usize != next_leaf || next_leaf >= leaves {
                            return Err(format!("node {n} has an out-of-order leaf {i}"));
                        }
                        if depth_of[n] + 1 != self.max_depth {
                            return Err("leaf above max depth".into());
                        }
                        next_leaf += 1;
                    }
                }
            }
        }
        if !self.nodes.is_empty() && (next_node != self.nodes.len() || next_leaf != leaves) {
            return Err("unreferenced nodes or leaves".into());
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let tree = Self::read_from(&mut r, path)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::format(path, "trailing bytes after octree"));
        }
        Ok(tree)
    }
}

fn assemble<T>(mut built: Vec<Build<T>>, levels: usize) -> Build<T> {
    // `built` is in octant-digit order with the top level as the lowest digits
    if levels == 0 {
        return built.pop().unwrap_or(Build::Empty);
    }
    let groups = built.len() / 8;
    let mut by_octant: Vec<Vec<Build<T>>> = (0..8).map(|_| Vec::with_capacity(groups)).collect();
    for (i, b) in built.into_iter().enumerate() {
        by_octant[i & 7].push(b);
    }
    // remaining digits shift down by 3 bits
    let children: Vec<Build<T>> = by_octant
        .into_iter()
        .map(|v| assemble(v, levels - 1))
        .collect();
    collapse(children)
}

fn collapse<T>(children: Vec<Build<T>>) -> Build<T> {
    if children.iter().all(|c| matches!(c, Build::Empty)) {
        return Build::Empty;
    }
    let arr: [Build<T>; 8] = children
        .try_into()
        .unwrap_or_else(|_| unreachable!("eight children"));
    Build::Node(Box::new(arr))
}

struct ExtractCtx<'a, T, S: ?Sized> {
    source: &'a S,
    cfg: &'a ExtractionConfig,
    bbox: Aabb<T>,
    res: usize,
    stride: usize,
}

impl<T: Real, S: RadianceSource<T> + ?Sized> ExtractCtx<'_, T, S> {
    fn voxel_point(&self, ijk: [usize; 3], offset: [T; 3]) -> Vec3<T> {
        let e = self.bbox.extent();
        let n = T::from_usize_lossy(self.res);
        Vec3::new(
            self.bbox.min.x + (T::from_usize_lossy(ijk[0]) + offset[0]) / n * e.x,
            self.bbox.min.y + (T::from_usize_lossy(ijk[1]) + offset[1]) / n * e.y,
            self.bbox.min.z + (T::from_usize_lossy(ijk[2]) + offset[2]) / n * e.z,
        )
    }

    /// Subtree `depth` levels above the leaves whose lowest voxel is `base`.
    fn build(&self, depth: usize, base: [usize; 3]) -> Build<T> {
        let levels = self.cfg.max_depth - depth;
        self.build_level(levels, base)
    }

    fn build_level(&self, levels: usize, base: [usize; 3]) -> Build<T> {
        if levels == 0 {
            return self.leaf(base);
        }
        let half = 1usize << (levels - 1);
        let children: Vec<Build<T>> = (0..8)
            .map(|oct| {
                let b = [
                    base[0] + if oct & 1 != 0 { half } else { 0 },
                    base[1] + if oct & 2 != 0 { half } else { 0 },
                    base[2] + if oct & 4 != 0 { half } else { 0 },
                ];
                self.build_level(levels - 1, b)
            })
            .collect();
        collapse(children)
    }

    fn leaf(&self, ijk: [usize; 3]) -> Build<T> {
        let mut coeffs = vec![T::zero(); self.stride - 1];
        let center = self.voxel_point(ijk, [T::half(); 3]);
        if self.source.sample(center, &mut coeffs).to_f64_lossy() < self.cfg.prune_sigma {
            return Build::Empty;
        }
        let index = ((ijk[2] * self.res + ijk[1]) * self.res + ijk[0]) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(index);
        let mut sum = vec![T::zero(); self.stride];
        for _ in 0..self.cfg.refine_samples {
            let off = [
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
                T::lit(rng.gen::<f64>()),
            ];
            let sigma = self.source.sample(self.voxel_point(ijk, off), &mut coeffs);
            sum[0] += sigma;
            for (s, &c) in sum[1..].iter_mut().zip(&coeffs) {
                *s += c;
            }
        }
        let n = T::from_usize_lossy(self.cfg.refine_samples);
        sum.iter_mut().for_each(|v| *v /= n);
        Build::Leaf(sum)
    }
}

impl<T: Real> RadianceSource<T> for Plenoctree<T> {
    fn l_max(&self) -> usize {
        self.l_max
    }

    fn bbox(&self) -> Aabb<T> {
        self.bbox
    }

    fn sample(&self, p: Vec3<T>, coeffs: &mut [T]) -> T {
        match self.lookup(p) {
            Some(i) => {
                let leaf = self.leaf(i);
                coeffs.copy_from_slice(&leaf[1..]);
                leaf[0]
            }
            None => {
                coeffs.iter_mut().for_each(|c| *c = T::zero());
                T::zero()
            }
        }
    }
}
