//! Appearance transfer between subjects that share the primitive layout.
//!
//! Primitives correspond index-to-index through the body's UV grid, so
//! moving the color payloads moves the appearance while the target keeps
//! its own geometry: density, scale corrections, and kinematics stay put.

use crate::error::{Error, Result};
use crate::renderer::PrimitiveSet;

pub fn transfer_texture(src: &PrimitiveSet, dst: &PrimitiveSet) -> Result<PrimitiveSet> {
    src.validate()?;
    dst.validate()?;
    if src.grid_width != dst.grid_width || src.payload_res != dst.payload_res {
        return Err(Error::validation(format!(
            "layouts differ: source {}x{} payloads at {}, target {}x{} at {}",
            src.grid_width,
            src.grid_width,
            src.payload_res,
            dst.grid_width,
            dst.grid_width,
            dst.payload_res
        )));
    }
    let mut out = dst.clone();
    out.color = src.color.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apps::make_synthetic_subject;
    use crate::renderer::{render, MarchConfig};

    #[test]
    fn self_transfer_is_identity() {
        let subject = make_synthetic_subject(2, 2, 2, 1, 32).unwrap();
        let out = transfer_texture(&subject.gt_set, &subject.gt_set).unwrap();
        assert_eq!(out, subject.gt_set);
    }

    #[test]
    fn transfer_moves_color_and_preserves_geometry() {
        let src_subject = make_synthetic_subject(31, 3, 2, 1, 48).unwrap();
        let dst_subject = make_synthetic_subject(32, 3, 2, 1, 48).unwrap();
        let (src, dst) = (&src_subject.gt_set, &dst_subject.gt_set);
        let out = transfer_texture(src, dst).unwrap();
        assert_eq!(out.color, src.color);
        assert_eq!(out.density, dst.density);
        assert_eq!(out.kin, dst.kin);

        let camera = &dst_subject.views.cameras[0];
        let march = MarchConfig::for_set(dst);
        let before = render(dst, camera, &march).unwrap();
        let after = render(&out, camera, &march).unwrap();
        // geometry untouched: occupancy and depth are the same march
        for (a, b) in after.alpha.iter().zip(&before.alpha) {
            assert!((a - b).abs() < 1e-6);
        }
        for (a, b) in after.depth.iter().zip(&before.depth) {
            assert!((a - b).abs() < 1e-6);
        }
        // appearance moved: color differs where the body is visible
        let changed = after
            .rgb
            .iter()
            .zip(&before.rgb)
            .any(|(a, b)| (a - b).abs() > 1e-3);
        assert!(changed);
    }

    #[test]
    fn visible_region_shows_the_source_palette() {
        // paint source solid red and target solid blue; after transfer any
        // covered pixel must be red-dominant
        let subject = make_synthetic_subject(5, 2, 2, 1, 48).unwrap();
        let mut src = subject.gt_set.clone();
        let mut dst = subject.gt_set.clone();
        for k in 0..src.count() {
            let s3 = src.voxels_per_primitive();
            for vox in 0..s3 {
                let (r, g, b) =
                    (src.color_index(k, 0, vox), src.color_index(k, 1, vox), src.color_index(k, 2, vox));
                src.color[r] = 0.9;
                src.color[g] = 0.1;
                src.color[b] = 0.1;
                dst.color[r] = 0.1;
                dst.color[g] = 0.1;
                dst.color[b] = 0.9;
            }
        }
        let out = transfer_texture(&src, &dst).unwrap();
        let camera = &subject.views.cameras[0];
        let result = render(&out, camera, &MarchConfig::for_set(&dst)).unwrap();
        let mut covered = 0;
        for p in 0..result.alpha.len() {
            if result.alpha[p] > 0.5 {
                covered += 1;
                assert!(result.rgb[p * 3] > result.rgb[p * 3 + 2], "pixel {p} is not source-colored");
            }
        }
        assert!(covered > 0);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let a = make_synthetic_subject(1, 2, 2, 1, 32).unwrap().gt_set;
        let b = make_synthetic_subject(1, 3, 2, 1, 32).unwrap().gt_set;
        assert!(transfer_texture(&a, &b).is_err());
    }
}
