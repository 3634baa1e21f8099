//! Connected components and area opening.

use std::collections::VecDeque;

use super::ImageBuffer;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
    }
}

/// Component label per pixel (0 = background, components numbered from 1 in
/// raster order of their first pixel) and the pixel count of each component.
pub fn label_components(mask: &ImageBuffer, conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = mask.dims();
    let fg = |i: usize| mask.data()[i] != 0;
    let mut labels = vec![0u32; w * h];
    let mut areas = vec![0usize];
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !fg(start) || labels[start] != 0 {
            continue;
        }
        let label = areas.len() as u32;
        let mut area = 0;
        labels[start] = label;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in conn.offsets() {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if fg(j) && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            }
        }
        areas.push(area);
    }
    (labels, areas)
}

/// Clear every foreground component smaller than `min_area` pixels; all other
/// pixels keep their value.
pub fn area_open(mask: &ImageBuffer, min_area: usize, conn: Connectivity) -> ImageBuffer {
    assert_eq!(mask.channels(), 1, "area opening works on single-channel masks");
    let (labels, areas) = label_components(mask, conn);
    let mut out = mask.clone();
    for (v, &l) in out.data_mut().iter_mut().zip(&labels) {
        if l != 0 && areas[l as usize] < min_area {
            *v = 0;
        }
    }
    out
}
