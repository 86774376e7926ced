#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bbs/autodiff.hpp"

namespace bbs::ad {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

int64_t conv_out_size(int64_t in, int k, int stride, int pad, int dil) {
  return (in + 2 * pad - dil * (k - 1) - 1) / stride + 1;
}

// col is {Cin*kh*kw, Ho*Wo}; out-of-bounds taps contribute zero.
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, int dil, int64_t ho, int64_t wo, MatRM& col) {
  int64_t cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  col.setZero(cin * kh * kw, ho * wo);
  for (int64_t ci = 0; ci < cin; ++ci) {
    const double* xc = x.data.data() + ci * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        int64_t row = (ci * kh + ky) * kw + kx;
        double* dst = col.data() + row * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride - pad + static_cast<int64_t>(ky) * dil;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride - pad + static_cast<int64_t>(kx) * dil;
            if (ix < 0 || ix >= w) continue;
            dst[oy * wo + ox] = xc[iy * w + ix];
          }
        }
      }
    }
  }
}

void col2im(const MatRM& col, int kh, int kw, int stride, int pad, int dil, int64_t ho, int64_t wo, Tensor& x_acc) {
  int64_t cin = x_acc.dim(0), h = x_acc.dim(1), w = x_acc.dim(2);
  for (int64_t ci = 0; ci < cin; ++ci) {
    double* xc = x_acc.data.data() + ci * h * w;
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        int64_t row = (ci * kh + ky) * kw + kx;
        const double* src = col.data() + row * ho * wo;
        for (int64_t oy = 0; oy < ho; ++oy) {
          int64_t iy = oy * stride - pad + static_cast<int64_t>(ky) * dil;
          if (iy < 0 || iy >= h) continue;
          for (int64_t ox = 0; ox < wo; ++ox) {
            int64_t ix = ox * stride - pad + static_cast<int64_t>(kx) * dil;
            if (ix < 0 || ix >= w) continue;
            xc[iy * w + ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, const ConvSpec& spec) {
  if (x->value.rank() != 3 || w->value.rank() != 4)
    throw std::invalid_argument("conv2d: want x {C,H,W}, w {Cout,Cin,kh,kw}");
  int64_t cin = x->value.dim(0), h = x->value.dim(1), wid = x->value.dim(2);
  int64_t cout = w->value.dim(0);
  int kh = static_cast<int>(w->value.dim(2)), kw = static_cast<int>(w->value.dim(3));
  if (w->value.dim(1) != cin)
    throw std::invalid_argument("conv2d: input has " + std::to_string(cin) + " channels, kernel expects " + std::to_string(w->value.dim(1)));
  int64_t ho = conv_out_size(h, kh, spec.stride, spec.pad, spec.dilation);
  int64_t wo = conv_out_size(wid, kw, spec.stride, spec.pad, spec.dilation);
  if (ho <= 0 || wo <= 0)
    throw std::invalid_argument("conv2d: kernel does not fit input " + shape_str(x->value.shape));

  auto col = std::make_shared<MatRM>();
  im2col(x->value, kh, kw, spec.stride, spec.pad, spec.dilation, ho, wo, *col);

  Tensor out({cout, ho, wo});
  {
    MapC wm(w->value.data.data(), cout, cin * kh * kw);
    MapM om(out.data.data(), cout, ho * wo);
    om.noalias() = wm * (*col);
    if (b && b->value.numel() == cout)
      for (int64_t co = 0; co < cout; ++co) om.row(co).array() += b->value.data[static_cast<size_t>(co)];
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  ConvSpec sp = spec;
  return make_op_node(std::move(out), std::move(parents), [x, w, b, col, sp, kh, kw, cin, cout, ho, wo](Node& n) {
    MapC gm(n.grad.data.data(), cout, ho * wo);
    if (w->requires_grad) {
      MapM wg(w->ensure_grad().data.data(), cout, cin * kh * kw);
      wg.noalias() += gm * col->transpose();
    }
    if (b && b->requires_grad) {
      Tensor& bg = b->ensure_grad();
      for (int64_t co = 0; co < cout; ++co) bg.data[static_cast<size_t>(co)] += gm.row(co).sum();
    }
    if (x->requires_grad) {
      MapC wm(w->value.data.data(), cout, cin * kh * kw);
      MatRM dcol = wm.transpose() * gm;
      col2im(dcol, kh, kw, sp.stride, sp.pad, sp.dilation, ho, wo, x->ensure_grad());
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, int kernel, int stride) {
  if (x->value.rank() != 3 || w->value.rank() != 4)
    throw std::invalid_argument("conv_transpose2d: want x {C,H,W}, w {Cin,Cout,kh,kw}");
  int64_t cin = x->value.dim(0), h = x->value.dim(1), wid = x->value.dim(2);
  if (w->value.dim(0) != cin)
    throw std::invalid_argument("conv_transpose2d: channel mismatch");
  int64_t cout = w->value.dim(1);
  int k = kernel;
  int64_t ho = (h - 1) * stride + k;
  int64_t wo = (wid - 1) * stride + k;

  Tensor out({cout, ho, wo});
  {
    MapC wm(w->value.data.data(), cin, cout * k * k);
    MapC xm(x->value.data.data(), cin, h * wid);
    MatRM col = wm.transpose() * xm;  // {Cout*k*k, H*W}
    // scatter: out[co, iy*s+ky, ix*s+kx] += col[(co,ky,kx), (iy,ix)]
    for (int64_t co = 0; co < cout; ++co) {
      double* oc = out.data.data() + co * ho * wo;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double* src = col.data() + ((co * k + ky) * k + kx) * h * wid;
          for (int64_t iy = 0; iy < h; ++iy)
            for (int64_t ix = 0; ix < wid; ++ix) oc[(iy * stride + ky) * wo + ix * stride + kx] += src[iy * wid + ix];
        }
      if (b && b->value.numel() == cout) {
        double bv = b->value.data[static_cast<size_t>(co)];
        for (int64_t i = 0; i < ho * wo; ++i) oc[i] += bv;
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_op_node(std::move(out), std::move(parents), [x, w, b, k, stride, cin, cout, h, wid, ho, wo](Node& n) {
    // Gradient through the scatter is a plain convolution of n.grad with w.
    MatRM gcol;
    im2col(n.grad, k, k, stride, 0, 1, h, wid, gcol);  // {Cout*k*k, H*W}
    if (x->requires_grad) {
      MapC wm(w->value.data.data(), cin, cout * k * k);
      MapM xg(x->ensure_grad().data.data(), cin, h * wid);
      xg.noalias() += wm * gcol;
    }
    if (w->requires_grad) {
      MapC xm(x->value.data.data(), cin, h * wid);
      MapM wg(w->ensure_grad().data.data(), cin, cout * k * k);
      wg.noalias() += xm * gcol.transpose();
    }
    if (b && b->requires_grad) {
      Tensor& bg = b->ensure_grad();
      for (int64_t co = 0; co < cout; ++co) {
        double s = 0.0;
        const double* gc = n.grad.data.data() + co * ho * wo;
        for (int64_t i = 0; i < ho * wo; ++i) s += gc[i];
        bg.data[static_cast<size_t>(co)] += s;
      }
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int pad) {
  if (x->value.rank() != 3) throw std::invalid_argument("max_pool2d: want {C,H,W}");
  int64_t c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  int64_t ho = conv_out_size(h, kernel, stride, pad, 1);
  int64_t wo = conv_out_size(w, kernel, stride, pad, 1);
  Tensor out({c, ho, wo});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c * ho * wo));
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xc = x->value.data.data() + ch * h * w;
    for (int64_t oy = 0; oy < ho; ++oy)
      for (int64_t ox = 0; ox < wo; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        int64_t besti = -1;
        for (int ky = 0; ky < kernel; ++ky) {
          int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            int64_t ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            double v = xc[iy * w + ix];
            if (v > best) {
              best = v;
              besti = iy * w + ix;
            }
          }
        }
        out.at(ch, oy, ox) = best;
        (*arg)[static_cast<size_t>((ch * ho + oy) * wo + ox)] = ch * h * w + besti;
      }
  }
  return make_op_node(std::move(out), {x}, [x, arg](Node& n) {
    Tensor& acc = x->ensure_grad();
    for (size_t i = 0; i < arg->size(); ++i) acc.data[static_cast<size_t>((*arg)[i])] += n.grad.data[i];
  });
}

Var global_max_channels(const Var& x) {
  if (x->value.rank() != 3) throw std::invalid_argument("global_max_channels: want {C,H,W}");
  int64_t c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
  Tensor out({c});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xc = x->value.data.data() + ch * hw;
    int64_t besti = 0;
    for (int64_t i = 1; i < hw; ++i)
      if (xc[i] > xc[besti]) besti = i;
    out.data[static_cast<size_t>(ch)] = xc[besti];
    (*arg)[static_cast<size_t>(ch)] = ch * hw + besti;
  }
  return make_op_node(std::move(out), {x}, [x, arg](Node& n) {
    Tensor& acc = x->ensure_grad();
    for (size_t ch = 0; ch < arg->size(); ++ch) acc.data[static_cast<size_t>((*arg)[ch])] += n.grad.data[ch];
  });
}

Var max_over_channels(const Var& x) {
  if (x->value.rank() != 3) throw std::invalid_argument("max_over_channels: want {C,H,W}");
  int64_t c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  int64_t hw = h * w;
  Tensor out({1, h, w});
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(hw));
  for (int64_t i = 0; i < hw; ++i) {
    int64_t best = 0;
    for (int64_t ch = 1; ch < c; ++ch)
      if (x->value.data[static_cast<size_t>(ch * hw + i)] > x->value.data[static_cast<size_t>(best * hw + i)]) best = ch;
    out.data[static_cast<size_t>(i)] = x->value.data[static_cast<size_t>(best * hw + i)];
    (*arg)[static_cast<size_t>(i)] = best * hw + i;
  }
  return make_op_node(std::move(out), {x}, [x, arg](Node& n) {
    Tensor& acc = x->ensure_grad();
    for (size_t i = 0; i < arg->size(); ++i) acc.data[static_cast<size_t>((*arg)[i])] += n.grad.data[i];
  });
}

Var resize_bilinear(const Var& x, int64_t out_h, int64_t out_w) {
  if (x->value.rank() != 3) throw std::invalid_argument("resize_bilinear: want {C,H,W}");
  int64_t c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
  if (h == out_h && w == out_w) return x;
  auto ty = std::make_shared<std::vector<LerpTap>>(bilinear_taps(h, out_h));
  auto tx = std::make_shared<std::vector<LerpTap>>(bilinear_taps(w, out_w));
  Tensor out({c, out_h, out_w});
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const LerpTap& yt = (*ty)[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const LerpTap& xt = (*tx)[static_cast<size_t>(ox)];
        double top = x->value.at(ch, yt.i0, xt.i0) * (1.0 - xt.w1) + x->value.at(ch, yt.i0, xt.i1) * xt.w1;
        double bot = x->value.at(ch, yt.i1, xt.i0) * (1.0 - xt.w1) + x->value.at(ch, yt.i1, xt.i1) * xt.w1;
        out.at(ch, oy, ox) = top * (1.0 - yt.w1) + bot * yt.w1;
      }
    }
  return make_op_node(std::move(out), {x}, [x, ty, tx, c, out_h, out_w](Node& n) {
    Tensor& acc = x->ensure_grad();
    for (int64_t ch = 0; ch < c; ++ch)
      for (int64_t oy = 0; oy < out_h; ++oy) {
        const LerpTap& yt = (*ty)[static_cast<size_t>(oy)];
        for (int64_t ox = 0; ox < out_w; ++ox) {
          const LerpTap& xt = (*tx)[static_cast<size_t>(ox)];
          double g = n.grad.at(ch, oy, ox);
          acc.at(ch, yt.i0, xt.i0) += g * (1.0 - yt.w1) * (1.0 - xt.w1);
          acc.at(ch, yt.i0, xt.i1) += g * (1.0 - yt.w1) * xt.w1;
          acc.at(ch, yt.i1, xt.i0) += g * yt.w1 * (1.0 - xt.w1);
          acc.at(ch, yt.i1, xt.i1) += g * yt.w1 * xt.w1;
        }
      }
  });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
  if (x->value.rank() != 3) throw std::invalid_argument("group_norm: want {C,H,W}");
  int64_t c = x->value.dim(0), hw = x->value.dim(1) * x->value.dim(2);
  if (c % groups != 0) throw std::invalid_argument("group_norm: channels not divisible by groups");
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw std::invalid_argument("group_norm: affine params must have C entries");
  int64_t per = c / groups;
  int64_t m = per * hw;

  auto xhat = std::make_shared<Tensor>(x->value.shape);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(groups));
  Tensor out(x->value.shape);
  for (int g = 0; g < groups; ++g) {
    const double* xs = x->value.data.data() + static_cast<int64_t>(g) * m;
    double mu = 0.0;
    for (int64_t i = 0; i < m; ++i) mu += xs[i];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (int64_t i = 0; i < m; ++i) {
      double d = xs[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(m);
    double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(g)] = is;
    double* xh = xhat->data.data() + static_cast<int64_t>(g) * m;
    double* od = out.data.data() + static_cast<int64_t>(g) * m;
    for (int64_t i = 0; i < m; ++i) {
      xh[i] = (xs[i] - mu) * is;
      int64_t ch = g * per + i / hw;
      od[i] = xh[i] * gamma->value.data[static_cast<size_t>(ch)] + beta->value.data[static_cast<size_t>(ch)];
    }
  }
  return make_op_node(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, groups, per, hw, m](Node& n) {
    if (gamma->requires_grad) {
      Tensor& gg = gamma->ensure_grad();
      for (int64_t ch = 0; ch < per * groups; ++ch) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += n.grad.data[static_cast<size_t>(ch * hw + i)] * xhat->data[static_cast<size_t>(ch * hw + i)];
        gg.data[static_cast<size_t>(ch)] += s;
      }
    }
    if (beta->requires_grad) {
      Tensor& bg = beta->ensure_grad();
      for (int64_t ch = 0; ch < per * groups; ++ch) {
        double s = 0.0;
        for (int64_t i = 0; i < hw; ++i) s += n.grad.data[static_cast<size_t>(ch * hw + i)];
        bg.data[static_cast<size_t>(ch)] += s;
      }
    }
    if (x->requires_grad) {
      Tensor& xg = x->ensure_grad();
      for (int g = 0; g < groups; ++g) {
        double sum_gh = 0.0, sum_gh_xh = 0.0;
        for (int64_t i = 0; i < m; ++i) {
          int64_t idx = static_cast<int64_t>(g) * m + i;
          int64_t ch = g * per + i / hw;
          double gh = n.grad.data[static_cast<size_t>(idx)] * gamma->value.data[static_cast<size_t>(ch)];
          sum_gh += gh;
          sum_gh_xh += gh * xhat->data[static_cast<size_t>(idx)];
        }
        double mg = sum_gh / static_cast<double>(m);
        double mgx = sum_gh_xh / static_cast<double>(m);
        double is = (*inv_std)[static_cast<size_t>(g)];
        for (int64_t i = 0; i < m; ++i) {
          int64_t idx = static_cast<int64_t>(g) * m + i;
          int64_t ch = g * per + i / hw;
          double gh = n.grad.data[static_cast<size_t>(idx)] * gamma->value.data[static_cast<size_t>(ch)];
          xg.data[static_cast<size_t>(idx)] += is * (gh - mg - xhat->data[static_cast<size_t>(idx)] * mgx);
        }
      }
    }
  });
}

}  // namespace bbs::ad
