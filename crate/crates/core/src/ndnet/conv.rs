use serde::{Deserialize, Serialize};

/// Square-kernel 2-D convolution geometry over a `C x H x W` sample.
///
/// Conv weights are laid out `[out_c][in_c][k][k]`; transposed-conv weights
/// `[in_c][out_c][k][k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_h: usize,
    pub in_w: usize,
}

impl ConvGeometry {
    pub fn conv_output_hw(&self) -> (usize, usize) {
        let h = (self.in_h + 2 * self.padding).saturating_sub(self.kernel) / self.stride.max(1) + 1;
        let w = (self.in_w + 2 * self.padding).saturating_sub(self.kernel) / self.stride.max(1) + 1;
        (h, w)
    }

    pub fn transpose_output_hw(&self) -> (usize, usize) {
        let grow =
            |n: usize| ((n - 1) * self.stride + self.kernel).saturating_sub(2 * self.padding);
        (grow(self.in_h), grow(self.in_w))
    }

    pub(super) fn validate(&self, transpose: bool) -> Result<(), String> {
        if self.in_channels == 0
            || self.out_channels == 0
            || self.kernel == 0
            || self.stride == 0
            || self.in_h == 0
            || self.in_w == 0
        {
            return Err("convolution sizes must be positive".into());
        }
        if transpose {
            let (h, w) = self.transpose_output_hw();
            if h == 0 || w == 0 {
                return Err("transposed convolution produces an empty map".into());
            }
        } else if self.in_h + 2 * self.padding < self.kernel
            || self.in_w + 2 * self.padding < self.kernel
        {
            return Err("kernel larger than padded input".into());
        }
        Ok(())
    }
}

pub(super) fn conv_forward(
    g: &ConvGeometry,
    weight: &[f64],
    bias: &[f64],
    x: &[f64],
    out: &mut [f64],
) {
    let (oh, ow) = g.conv_output_hw();
    let k = g.kernel;
    let (ih, iw) = (g.in_h as isize, g.in_w as isize);
    for oc in 0..g.out_channels {
        for r in 0..oh {
            for c in 0..ow {
                let mut acc = bias[oc];
                for ic in 0..g.in_channels {
                    let wbase = (oc * g.in_channels + ic) * k * k;
                    let xbase = ic * g.in_h * g.in_w;
                    for kr in 0..k {
                        let xr = (r * g.stride + kr) as isize - g.padding as isize;
                        if xr < 0 || xr >= ih {
                            continue;
                        }
                        for kc in 0..k {
                            let xc = (c * g.stride + kc) as isize - g.padding as isize;
                            if xc < 0 || xc >= iw {
                                continue;
                            }
                            acc += weight[wbase + kr * k + kc]
                                * x[xbase + xr as usize * g.in_w + xc as usize];
                        }
                    }
                }
                out[(oc * oh + r) * ow + c] = acc;
            }
        }
    }
}

pub(super) fn conv_backward(
    g: &ConvGeometry,
    weight: &[f64],
    x: &[f64],
    delta: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
) {
    let (oh, ow) = g.conv_output_hw();
    let k = g.kernel;
    let (ih, iw) = (g.in_h as isize, g.in_w as isize);
    for oc in 0..g.out_channels {
        for r in 0..oh {
            for c in 0..ow {
                let d = delta[(oc * oh + r) * ow + c];
                if d == 0.0 {
                    continue;
                }
                gb[oc] += d;
                for ic in 0..g.in_channels {
                    let wbase = (oc * g.in_channels + ic) * k * k;
                    let xbase = ic * g.in_h * g.in_w;
                    for kr in 0..k {
                        let xr = (r * g.stride + kr) as isize - g.padding as isize;
                        if xr < 0 || xr >= ih {
                            continue;
                        }
                        for kc in 0..k {
                            let xc = (c * g.stride + kc) as isize - g.padding as isize;
                            if xc < 0 || xc >= iw {
                                continue;
                            }
                            let xi = xbase + xr as usize * g.in_w + xc as usize;
                            let wi = wbase + kr * k + kc;
                            gw[wi] += d * x[xi];
                            dx[xi] += d * weight[wi];
                        }
                    }
                }
            }
        }
    }
}

pub(super) fn conv_transpose_forward(
    g: &ConvGeometry,
    weight: &[f64],
    bias: &[f64],
    x: &[f64],
    out: &mut [f64],
) {
    let (oh, ow) = g.transpose_output_hw();
    let k = g.kernel;
    for oc in 0..g.out_channels {
        out[oc * oh * ow..(oc + 1) * oh * ow].fill(bias[oc]);
    }
    for ic in 0..g.in_channels {
        for r in 0..g.in_h {
            for c in 0..g.in_w {
                let v = x[(ic * g.in_h + r) * g.in_w + c];
                if v == 0.0 {
                    continue;
                }
                for oc in 0..g.out_channels {
                    let wbase = (ic * g.out_channels + oc) * k * k;
                    for kr in 0..k {
                        let orow = (r * g.stride + kr) as isize - g.padding as isize;
                        if orow < 0 || orow >= oh as isize {
                            continue;
                        }
                        for kc in 0..k {
                            let ocol = (c * g.stride + kc) as isize - g.padding as isize;
                            if ocol < 0 || ocol >= ow as isize {
                                continue;
                            }
                            out[(oc * oh + orow as usize) * ow + ocol as usize] +=
                                v * weight[wbase + kr * k + kc];
                        }
                    }
                }
            }
        }
    }
}

pub(super) fn conv_transpose_backward(
    g: &ConvGeometry,
    weight: &[f64],
    x: &[f64],
    delta: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    dx: &mut [f64],
) {
    let (oh, ow) = g.transpose_output_hw();
    let k = g.kernel;
    for oc in 0..g.out_channels {
        gb[oc] += delta[oc * oh * ow..(oc + 1) * oh * ow].iter().sum::<f64>();
    }
    for ic in 0..g.in_channels {
        for r in 0..g.in_h {
            for c in 0..g.in_w {
                let xi = (ic * g.in_h + r) * g.in_w + c;
                let v = x[xi];
                let mut acc = 0.0;
                for oc in 0..g.out_channels {
                    let wbase = (ic * g.out_channels + oc) * k * k;
                    for kr in 0..k {
                        let orow = (r * g.stride + kr) as isize - g.padding as isize;
                        if orow < 0 || orow >= oh as isize {
                            continue;
                        }
                        for kc in 0..k {
                            let ocol = (c * g.stride + kc) as isize - g.padding as isize;
                            if ocol < 0 || ocol >= ow as isize {
                                continue;
                            }
                            let d = delta[(oc * oh + orow as usize) * ow + ocol as usize];
                            let wi = wbase + kr * k + kc;
                            gw[wi] += d * v;
                            acc += d * weight[wi];
                        }
                    }
                }
                dx[xi] += acc;
            }
        }
    }
}
