use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::{CropConfig, DetectError, Mask};

/// Pixel adjacency used for labeling. Serialized as the number `4` or `8`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Connectivity {
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub area: usize,
    pub bbox: BBox,
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// Two-pass union-find labeling.
///
/// Components come back sorted by descending area, ties broken by the `(y, x)` of
/// their bounding box.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> Vec<Component> {
    let (w, h) = (mask.width(), mask.height());
    // label 0 = background
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut n = 0;
            if x > 0 && labels[y * w + x - 1] != 0 {
                neighbors[n] = labels[y * w + x - 1];
                n += 1;
            }
            if y > 0 {
                let up = (y - 1) * w;
                if labels[up + x] != 0 {
                    neighbors[n] = labels[up + x];
                    n += 1;
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && labels[up + x - 1] != 0 {
                        neighbors[n] = labels[up + x - 1];
                        n += 1;
                    }
                    if x + 1 < w && labels[up + x + 1] != 0 {
                        neighbors[n] = labels[up + x + 1];
                        n += 1;
                    }
                }
            }
            let label = if n == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                let first = neighbors[0];
                for &other in &neighbors[1..n] {
                    union(&mut parent, first, other);
                }
                first
            };
            labels[y * w + x] = label;
        }
    }

    // root label -> accumulator slot
    let mut slot = vec![usize::MAX; parent.len()];
    let mut acc: Vec<(usize, usize, usize, usize, usize)> = Vec::new(); // area, x0, y0, x1, y1
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l == 0 {
                continue;
            }
            let root = find(&mut parent, l) as usize;
            if slot[root] == usize::MAX {
                slot[root] = acc.len();
                acc.push((0, x, y, x, y));
            }
            let a = &mut acc[slot[root]];
            a.0 += 1;
            a.1 = a.1.min(x);
            a.2 = a.2.min(y);
            a.3 = a.3.max(x);
            a.4 = a.4.max(y);
        }
    }
    let mut out: Vec<Component> = acc
        .into_iter()
        .map(|(area, x0, y0, x1, y1)| Component { area, bbox: BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1) })
        .collect();
    out.sort_by(|a, b| b.area.cmp(&a.area).then(a.bbox.y.cmp(&b.bbox.y)).then(a.bbox.x.cmp(&b.bbox.x)));
    out
}

/// Tight box of the largest component that survives the dust filter.
pub fn mask_to_bbox(mask: &Mask, cfg: &CropConfig) -> Result<BBox, DetectError> {
    connected_components(mask, cfg.connectivity)
        .into_iter()
        .find(|c| c.area >= cfg.min_area)
        .map(|c| c.bbox)
        .ok_or(DetectError::NoInsect { min_area: cfg.min_area })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_by_five() -> Mask {
        Mask::from_points(5, 5, &[(1, 1), (2, 1), (1, 2), (2, 2), (4, 4)])
    }

    #[test]
    fn block_and_speck() {
        let cs = connected_components(&five_by_five(), Connectivity::Eight);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0], Component { area: 4, bbox: BBox::new(1, 1, 2, 2) });
        assert_eq!(cs[1], Component { area: 1, bbox: BBox::new(4, 4, 1, 1) });
    }

    #[test]
    fn diagonal_pair() {
        let m = Mask::from_points(2, 2, &[(0, 0), (1, 1)]);
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
        // anti-diagonal exercises the up-right neighbor
        let m = Mask::from_points(2, 2, &[(1, 0), (0, 1)]);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
    }

    #[test]
    fn full_and_empty() {
        let full = Mask::new(7, 3, vec![true; 21]).unwrap();
        let cs = connected_components(&full, Connectivity::Four);
        assert_eq!(cs, vec![Component { area: 21, bbox: BBox::new(0, 0, 7, 3) }]);
        assert!(connected_components(&Mask::empty(4, 4), Connectivity::Eight).is_empty());
    }

    #[test]
    fn u_shape_merges_labels() {
        // two arms only meet at the bottom row
        let m = Mask::from_points(3, 3, &[(0, 0), (2, 0), (0, 1), (2, 1), (0, 2), (1, 2), (2, 2)]);
        let cs = connected_components(&m, Connectivity::Four);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].area, 7);
    }

    #[test]
    fn tie_order_by_position() {
        let m = Mask::from_points(6, 6, &[(4, 0), (0, 3), (3, 3)]);
        let cs = connected_components(&m, Connectivity::Four);
        let boxes: Vec<(usize, usize)> = cs.iter().map(|c| (c.bbox.x, c.bbox.y)).collect();
        assert_eq!(boxes, vec![(4, 0), (0, 3), (3, 3)]);
    }

    #[test]
    fn mask_to_bbox_examples() {
        let cfg = CropConfig { min_area: 2, ..Default::default() };
        assert_eq!(mask_to_bbox(&five_by_five(), &cfg).unwrap(), BBox::new(1, 1, 2, 2));
        assert_eq!(mask_to_bbox(&Mask::empty(5, 5), &cfg), Err(DetectError::NoInsect { min_area: 2 }));

        let mut pts = Vec::new();
        for y in 0..3 {
            for x in 0..3 {
                pts.push((x, y));
            }
        }
        for y in 5..7 {
            for x in 5..7 {
                pts.push((x, y));
            }
        }
        let m = Mask::from_points(8, 8, &pts);
        assert_eq!(mask_to_bbox(&m, &cfg).unwrap(), BBox::new(0, 0, 3, 3));
        let strict = CropConfig { min_area: 10, ..Default::default() };
        assert!(mask_to_bbox(&m, &strict).is_err());
    }

    #[test]
    fn connectivity_serde() {
        assert_eq!(serde_json::to_string(&Connectivity::Four).unwrap(), "4");
        let c: Connectivity = serde_json::from_str("8").unwrap();
        assert_eq!(c, Connectivity::Eight);
        assert!(serde_json::from_str::<Connectivity>("6").is_err());
    }
}
