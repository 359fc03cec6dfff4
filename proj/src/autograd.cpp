#include "msct/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace msct {

namespace {

std::size_t checked_numel(const std::vector<int>& s) {
    if (s.empty()) throw DataError("tensor needs at least one dimension");
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw DataError("tensor dimension must be positive, got " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw DataError(msg);
}

}  // namespace

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)), v(checked_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
    if (checked_numel(shape) != v.size())
        throw DataError("tensor payload does not match shape " + shape_str(shape));
}

void Tensor::check_finite(const std::string& where) const {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("non-finite value in " + where);
    }
}

std::string shape_str(const std::vector<int>& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const std::vector<int>& s) { return checked_numel(s); }

int Tape::push(Tensor value, BackFn back) {
#ifndef NDEBUG
    value.check_finite("tape node " + std::to_string(nodes_.size()));
#endif
    nodes_.push_back(Node{std::move(value), Tensor{}, false, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_alloc) {
        n.grad = Tensor::zeros(n.value.shape);
        n.grad_alloc = true;
    }
    return n.grad;
}

void Tape::backward(int root) {
    require(nodes_[static_cast<std::size_t>(root)].value.numel() == 1,
            "backward root must be scalar");
    grad(root).v[0] = 1.0;
    for (int id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.back && n.grad_alloc) n.back(*this, id);
    }
}

// ---- elementwise ----

int add(Tape& t, int a, int b) {
    const Tensor& ta = t.val(a);
    const Tensor& tb = t.val(b);
    require(ta.shape == tb.shape, "add: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    return t.push(std::move(out), [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            ga.v[i] += g.v[i];
            gb.v[i] += g.v[i];
        }
    });
}

int sub(Tape& t, int a, int b) {
    const Tensor& ta = t.val(a);
    const Tensor& tb = t.val(b);
    require(ta.shape == tb.shape, "sub: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    Tensor out = ta;
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
    return t.push(std::move(out), [a, b](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            ga.v[i] += g.v[i];
            gb.v[i] -= g.v[i];
        }
    });
}

namespace {

/*** Odometer over the output coords of a broadcast pair. */
struct Broadcast {
    std::vector<int> out_shape;
    std::vector<std::size_t> sa, sb;  // strides (0 on broadcast dims)

    Broadcast(const std::vector<int>& a, const std::vector<int>& b) {
        require(a.size() == b.size(), "broadcast: rank mismatch " + shape_str(a) + " vs " + shape_str(b));
        int r = static_cast<int>(a.size());
        out_shape.resize(a.size());
        for (int i = 0; i < r; ++i) {
            int da = a[static_cast<std::size_t>(i)], db = b[static_cast<std::size_t>(i)];
            require(da == db || da == 1 || db == 1,
                    "broadcast: incompatible shapes " + shape_str(a) + " vs " + shape_str(b));
            out_shape[static_cast<std::size_t>(i)] = std::max(da, db);
        }
        sa.assign(a.size(), 0);
        sb.assign(a.size(), 0);
        std::size_t stride = 1;
        for (int i = r - 1; i >= 0; --i) {
            if (a[static_cast<std::size_t>(i)] > 1) sa[static_cast<std::size_t>(i)] = stride;
            stride *= static_cast<std::size_t>(a[static_cast<std::size_t>(i)]);
        }
        stride = 1;
        for (int i = r - 1; i >= 0; --i) {
            if (b[static_cast<std::size_t>(i)] > 1) sb[static_cast<std::size_t>(i)] = stride;
            stride *= static_cast<std::size_t>(b[static_cast<std::size_t>(i)]);
        }
    }

    template <typename Fn>
    void walk(Fn&& fn) const {
        std::vector<int> c(out_shape.size(), 0);
        std::size_t n = shape_numel(out_shape);
        std::size_t ia = 0, ib = 0;
        for (std::size_t k = 0; k < n; ++k) {
            fn(k, ia, ib);
            for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) {
                std::size_t ui = static_cast<std::size_t>(i);
                ++c[ui];
                ia += sa[ui];
                ib += sb[ui];
                if (c[ui] < out_shape[ui]) break;
                ia -= sa[ui] * static_cast<std::size_t>(out_shape[ui]);
                ib -= sb[ui] * static_cast<std::size_t>(out_shape[ui]);
                c[ui] = 0;
            }
        }
    }
};

}  // namespace

int mul(Tape& t, int a, int b) {
    const Tensor& ta = t.val(a);
    const Tensor& tb = t.val(b);
    Broadcast bc(ta.shape, tb.shape);
    Tensor out(bc.out_shape);
    bc.walk([&](std::size_t k, std::size_t ia, std::size_t ib) { out.v[k] = ta.v[ia] * tb.v[ib]; });
    return t.push(std::move(out), [a, b, bc](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& ta2 = tp.val(a);
        const Tensor& tb2 = tp.val(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        bc.walk([&](std::size_t k, std::size_t ia, std::size_t ib) {
            ga.v[ia] += g.v[k] * tb2.v[ib];
            gb.v[ib] += g.v[k] * ta2.v[ia];
        });
    });
}

int scale(Tape& t, int a, double c) {
    Tensor out = t.val(a);
    for (double& x : out.v) x *= c;
    return t.push(std::move(out), [a, c](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += c * g.v[i];
    });
}

int relu(Tape& t, int a) {
    Tensor out = t.val(a);
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return t.push(std::move(out), [a](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& x = tp.val(a);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) {
            if (x.v[i] > 0.0) ga.v[i] += g.v[i];
        }
    });
}

int sigmoid(Tape& t, int a) {
    Tensor out = t.val(a);
    for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
    return t.push(std::move(out), [a](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.val(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * y.v[i] * (1.0 - y.v[i]);
    });
}

int mean_all(Tape& t, int a) {
    const Tensor& ta = t.val(a);
    KahanSum s;
    for (double x : ta.v) s.add(x);
    double n = static_cast<double>(ta.numel());
    return t.push(Tensor::scalar(s.value() / n), [a, n](Tape& tp, int self) {
        double g = tp.grad(self).v[0] / n;
        Tensor& ga = tp.grad(a);
        for (double& x : ga.v) x += g;
    });
}

int reshape(Tape& t, int a, std::vector<int> shape) {
    const Tensor& ta = t.val(a);
    require(shape_numel(shape) == ta.numel(),
            "reshape: element count mismatch " + shape_str(ta.shape) + " -> " + shape_str(shape));
    Tensor out(std::move(shape), ta.v);
    return t.push(std::move(out), [a](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i];
    });
}

// ---- structure ----

int concat0(Tape& t, const std::vector<int>& ids) {
    require(!ids.empty(), "concat0: nothing to concatenate");
    std::vector<int> shape = t.val(ids[0]).shape;
    int total = 0;
    for (int id : ids) {
        const Tensor& x = t.val(id);
        require(x.rank() == static_cast<int>(shape.size()), "concat0: rank mismatch");
        for (int i = 1; i < x.rank(); ++i)
            require(x.dim(i) == shape[static_cast<std::size_t>(i)],
                    "concat0: trailing dims differ, " + shape_str(x.shape) + " vs " + shape_str(shape));
        total += x.dim(0);
    }
    shape[0] = total;
    Tensor out(shape);
    std::size_t off = 0;
    for (int id : ids) {
        const Tensor& x = t.val(id);
        std::copy(x.v.begin(), x.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(off));
        off += x.numel();
    }
    return t.push(std::move(out), [ids](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        std::size_t off2 = 0;
        for (int id : ids) {
            Tensor& ga = tp.grad(id);
            for (std::size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g.v[off2 + i];
            off2 += ga.v.size();
        }
    });
}

int slice0(Tape& t, int a, int c0, int c1) {
    const Tensor& ta = t.val(a);
    require(0 <= c0 && c0 < c1 && c1 <= ta.dim(0),
            "slice0: range [" + std::to_string(c0) + ", " + std::to_string(c1) + ") outside " +
                shape_str(ta.shape));
    std::vector<int> shape = ta.shape;
    shape[0] = c1 - c0;
    std::size_t inner = ta.numel() / static_cast<std::size_t>(ta.dim(0));
    Tensor out(shape);
    std::copy(ta.v.begin() + static_cast<std::ptrdiff_t>(inner * static_cast<std::size_t>(c0)),
              ta.v.begin() + static_cast<std::ptrdiff_t>(inner * static_cast<std::size_t>(c1)),
              out.v.begin());
    return t.push(std::move(out), [a, c0, inner](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad(a);
        std::size_t base = inner * static_cast<std::size_t>(c0);
        for (std::size_t i = 0; i < g.v.size(); ++i) ga.v[base + i] += g.v[i];
    });
}

// ---- convolutions ----

namespace {

struct AxisGeom {
    int cin, cout, k, len, out_len, pad;
    std::size_t outer, inner;
};

AxisGeom axis_geom(const Tensor& x, const Tensor& w, int axis, Pad pad) {
    require(x.rank() >= 2, "conv_axis: input rank must be >= 2, got " + shape_str(x.shape));
    require(axis >= 1 && axis < x.rank(), "conv_axis: axis " + std::to_string(axis) + " outside input rank");
    require(w.rank() == 3, "conv_axis: weight must be [Cout, Cin, K], got " + shape_str(w.shape));
    require(w.dim(1) == x.dim(0), "conv_axis: Cin mismatch, weight " + shape_str(w.shape) +
                                      " input " + shape_str(x.shape));
    AxisGeom g;
    g.cin = x.dim(0);
    g.cout = w.dim(0);
    g.k = w.dim(2);
    g.len = x.dim(axis);
    if (pad == Pad::same) {
        require(g.k % 2 == 1, "conv_axis: 'same' needs an odd kernel");
        g.pad = g.k / 2;
        g.out_len = g.len;
    } else {
        require(g.len >= g.k, "conv_axis: kernel longer than axis, " + shape_str(w.shape) + " on " +
                                  shape_str(x.shape));
        g.pad = 0;
        g.out_len = g.len - g.k + 1;
    }
    g.outer = 1;
    for (int i = 1; i < axis; ++i) g.outer *= static_cast<std::size_t>(x.dim(i));
    g.inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) g.inner *= static_cast<std::size_t>(x.dim(i));
    return g;
}

}  // namespace

int conv_axis(Tape& t, int x, int w, int b, int axis, Pad pad) {
    const Tensor& tx = t.val(x);
    const Tensor& tw = t.val(w);
    AxisGeom g = axis_geom(tx, tw, axis, pad);
    if (b >= 0)
        require(t.val(b).shape == std::vector<int>{g.cout}, "conv_axis: bias shape must be [Cout]");

    std::vector<int> oshape = tx.shape;
    oshape[0] = g.cout;
    oshape[static_cast<std::size_t>(axis)] = g.out_len;
    Tensor out(oshape);

    const double* xv = tx.v.data();
    const double* wv = tw.v.data();
    const double* bv = b >= 0 ? t.val(b).v.data() : nullptr;
    double* ov = out.v.data();
    const std::size_t x_ch = g.outer * static_cast<std::size_t>(g.len) * g.inner;
    const std::size_t o_ch = g.outer * static_cast<std::size_t>(g.out_len) * g.inner;

    for (int co = 0; co < g.cout; ++co) {
        for (std::size_t po = 0; po < g.outer; ++po) {
            for (int to = 0; to < g.out_len; ++to) {
                double* orow = ov + co * o_ch + po * static_cast<std::size_t>(g.out_len) * g.inner +
                               static_cast<std::size_t>(to) * g.inner;
                if (bv) {
                    for (std::size_t pi = 0; pi < g.inner; ++pi) orow[pi] = bv[co];
                }
                for (int ci = 0; ci < g.cin; ++ci) {
                    const double* wrow = wv + (static_cast<std::size_t>(co) * g.cin + ci) * g.k;
                    const double* xch = xv + ci * x_ch + po * static_cast<std::size_t>(g.len) * g.inner;
                    for (int j = 0; j < g.k; ++j) {
                        int s = to + j - g.pad;
                        if (s < 0 || s >= g.len) continue;
                        const double* xrow = xch + static_cast<std::size_t>(s) * g.inner;
                        double wj = wrow[j];
                        for (std::size_t pi = 0; pi < g.inner; ++pi) orow[pi] += wj * xrow[pi];
                    }
                }
            }
        }
    }

    return t.push(std::move(out), [x, w, b, axis, pad](Tape& tp, int self) {
        const Tensor& tx2 = tp.val(x);
        const Tensor& tw2 = tp.val(w);
        AxisGeom g2 = axis_geom(tx2, tw2, axis, pad);
        const Tensor& gr = tp.grad(self);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(w);
        const double* gv = gr.v.data();
        const double* xv2 = tx2.v.data();
        const double* wv2 = tw2.v.data();
        const std::size_t x_ch = g2.outer * static_cast<std::size_t>(g2.len) * g2.inner;
        const std::size_t o_ch = g2.outer * static_cast<std::size_t>(g2.out_len) * g2.inner;

        if (b >= 0) {
            Tensor& gb = tp.grad(b);
            for (int co = 0; co < g2.cout; ++co) {
                double s = 0.0;
                const double* gch = gv + co * o_ch;
                for (std::size_t i = 0; i < o_ch; ++i) s += gch[i];
                gb.v[static_cast<std::size_t>(co)] += s;
            }
        }
        for (int co = 0; co < g2.cout; ++co) {
            for (std::size_t po = 0; po < g2.outer; ++po) {
                for (int to = 0; to < g2.out_len; ++to) {
                    const double* grow = gv + co * o_ch +
                                         po * static_cast<std::size_t>(g2.out_len) * g2.inner +
                                         static_cast<std::size_t>(to) * g2.inner;
                    for (int ci = 0; ci < g2.cin; ++ci) {
                        const double* wrow = wv2 + (static_cast<std::size_t>(co) * g2.cin + ci) * g2.k;
                        double* gxch = gx.v.data() + ci * x_ch +
                                       po * static_cast<std::size_t>(g2.len) * g2.inner;
                        double* gwrow = gw.v.data() + (static_cast<std::size_t>(co) * g2.cin + ci) * g2.k;
                        const double* xch = xv2 + ci * x_ch +
                                            po * static_cast<std::size_t>(g2.len) * g2.inner;
                        for (int j = 0; j < g2.k; ++j) {
                            int s = to + j - g2.pad;
                            if (s < 0 || s >= g2.len) continue;
                            double* gxrow = gxch + static_cast<std::size_t>(s) * g2.inner;
                            const double* xrow = xch + static_cast<std::size_t>(s) * g2.inner;
                            double wj = wrow[j];
                            double acc = 0.0;
                            for (std::size_t pi = 0; pi < g2.inner; ++pi) {
                                gxrow[pi] += wj * grow[pi];
                                acc += grow[pi] * xrow[pi];
                            }
                            gwrow[j] += acc;
                        }
                    }
                }
            }
        }
    });
}

int conv2d(Tape& t, int x, int w, int b) {
    const Tensor& tx = t.val(x);
    const Tensor& tw = t.val(w);
    require(tx.rank() == 3, "conv2d: input must be [Cin, H, W], got " + shape_str(tx.shape));
    require(tw.rank() == 4, "conv2d: weight must be [Cout, Cin, KH, KW], got " + shape_str(tw.shape));
    require(tw.dim(1) == tx.dim(0), "conv2d: Cin mismatch, weight " + shape_str(tw.shape) +
                                        " input " + shape_str(tx.shape));
    require(tw.dim(2) % 2 == 1 && tw.dim(3) % 2 == 1, "conv2d: 'same' needs odd kernels");
    int cin = tx.dim(0), h = tx.dim(1), wd = tx.dim(2);
    int cout = tw.dim(0), kh = tw.dim(2), kw = tw.dim(3);
    int ph = kh / 2, pw = kw / 2;
    if (b >= 0) require(t.val(b).shape == std::vector<int>{cout}, "conv2d: bias shape must be [Cout]");

    Tensor out({cout, h, wd});
    const double* xv = tx.v.data();
    const double* wv = tw.v.data();
    const double* bv = b >= 0 ? t.val(b).v.data() : nullptr;
    for (int co = 0; co < cout; ++co) {
        for (int y = 0; y < h; ++y) {
            for (int xx = 0; xx < wd; ++xx) {
                double acc = bv ? bv[co] : 0.0;
                for (int ci = 0; ci < cin; ++ci) {
                    for (int jy = 0; jy < kh; ++jy) {
                        int sy = y + jy - ph;
                        if (sy < 0 || sy >= h) continue;
                        const double* xrow = xv + (static_cast<std::size_t>(ci) * h + sy) * wd;
                        const double* wrow =
                            wv + ((static_cast<std::size_t>(co) * cin + ci) * kh + jy) * kw;
                        for (int jx = 0; jx < kw; ++jx) {
                            int sx = xx + jx - pw;
                            if (sx < 0 || sx >= wd) continue;
                            acc += wrow[jx] * xrow[sx];
                        }
                    }
                }
                out.v[(static_cast<std::size_t>(co) * h + y) * wd + xx] = acc;
            }
        }
    }

    return t.push(std::move(out), [x, w, b, cin, h, wd, cout, kh, kw, ph, pw](Tape& tp, int self) {
        const Tensor& gr = tp.grad(self);
        const Tensor& tx2 = tp.val(x);
        const Tensor& tw2 = tp.val(w);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(w);
        if (b >= 0) {
            Tensor& gb = tp.grad(b);
            for (int co = 0; co < cout; ++co) {
                double s = 0.0;
                const double* gch = gr.v.data() + static_cast<std::size_t>(co) * h * wd;
                for (int i = 0; i < h * wd; ++i) s += gch[i];
                gb.v[static_cast<std::size_t>(co)] += s;
            }
        }
        for (int co = 0; co < cout; ++co) {
            for (int y = 0; y < h; ++y) {
                for (int xx = 0; xx < wd; ++xx) {
                    double g = gr.v[(static_cast<std::size_t>(co) * h + y) * wd + xx];
                    if (g == 0.0) continue;
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int jy = 0; jy < kh; ++jy) {
                            int sy = y + jy - ph;
                            if (sy < 0 || sy >= h) continue;
                            for (int jx = 0; jx < kw; ++jx) {
                                int sx = xx + jx - pw;
                                if (sx < 0 || sx >= wd) continue;
                                std::size_t xi = (static_cast<std::size_t>(ci) * h + sy) * wd + sx;
                                std::size_t wi =
                                    ((static_cast<std::size_t>(co) * cin + ci) * kh + jy) * kw + jx;
                                gx.v[xi] += g * tw2.v[wi];
                                gw.v[wi] += g * tx2.v[xi];
                            }
                        }
                    }
                }
            }
        }
    });
}

int linear(Tape& t, int x, int w, int b) {
    const Tensor& tx = t.val(x);
    const Tensor& tw = t.val(w);
    require(tx.rank() == 1, "linear: input must be [Cin], got " + shape_str(tx.shape));
    require(tw.rank() == 2 && tw.dim(1) == tx.dim(0),
            "linear: weight " + shape_str(tw.shape) + " does not match input " + shape_str(tx.shape));
    int cin = tx.dim(0), cout = tw.dim(0);
    if (b >= 0) require(t.val(b).shape == std::vector<int>{cout}, "linear: bias shape must be [Cout]");
    Tensor out({cout});
    for (int co = 0; co < cout; ++co) {
        double acc = b >= 0 ? t.val(b).v[static_cast<std::size_t>(co)] : 0.0;
        for (int ci = 0; ci < cin; ++ci)
            acc += tw.v[static_cast<std::size_t>(co) * cin + ci] * tx.v[static_cast<std::size_t>(ci)];
        out.v[static_cast<std::size_t>(co)] = acc;
    }
    return t.push(std::move(out), [x, w, b, cin, cout](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& tx2 = tp.val(x);
        const Tensor& tw2 = tp.val(w);
        Tensor& gx = tp.grad(x);
        Tensor& gw = tp.grad(w);
        for (int co = 0; co < cout; ++co) {
            double gc = g.v[static_cast<std::size_t>(co)];
            if (b >= 0) tp.grad(b).v[static_cast<std::size_t>(co)] += gc;
            for (int ci = 0; ci < cin; ++ci) {
                gx.v[static_cast<std::size_t>(ci)] += gc * tw2.v[static_cast<std::size_t>(co) * cin + ci];
                gw.v[static_cast<std::size_t>(co) * cin + ci] += gc * tx2.v[static_cast<std::size_t>(ci)];
            }
        }
    });
}

int batchnorm(Tape& t, int x, int gamma, int beta, double eps) {
    const Tensor& tx = t.val(x);
    int c = tx.dim(0);
    require(t.val(gamma).shape == std::vector<int>{c} && t.val(beta).shape == std::vector<int>{c},
            "batchnorm: gamma/beta must be [C] with C = " + std::to_string(c));
    std::size_t n = tx.numel() / static_cast<std::size_t>(c);
    Tensor out(tx.shape);
    for (int ch = 0; ch < c; ++ch) {
        const double* xc = tx.v.data() + static_cast<std::size_t>(ch) * n;
        double mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += xc[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += (xc[i] - mu) * (xc[i] - mu);
        var /= static_cast<double>(n);
        double inv = 1.0 / std::sqrt(var + eps);
        double g = t.val(gamma).v[static_cast<std::size_t>(ch)];
        double bo = t.val(beta).v[static_cast<std::size_t>(ch)];
        double* oc = out.v.data() + static_cast<std::size_t>(ch) * n;
        for (std::size_t i = 0; i < n; ++i) oc[i] = g * (xc[i] - mu) * inv + bo;
    }
    return t.push(std::move(out), [x, gamma, beta, eps, c, n](Tape& tp, int self) {
        const Tensor& gr = tp.grad(self);
        const Tensor& tx2 = tp.val(x);
        Tensor& gx = tp.grad(x);
        Tensor& gg = tp.grad(gamma);
        Tensor& gb = tp.grad(beta);
        for (int ch = 0; ch < c; ++ch) {
            const double* xc = tx2.v.data() + static_cast<std::size_t>(ch) * n;
            const double* gc = gr.v.data() + static_cast<std::size_t>(ch) * n;
            double mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += xc[i];
            mu /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) var += (xc[i] - mu) * (xc[i] - mu);
            var /= static_cast<double>(n);
            double inv = 1.0 / std::sqrt(var + eps);
            double gam = tp.val(gamma).v[static_cast<std::size_t>(ch)];

            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sum_g += gc[i];
                sum_gx += gc[i] * (xc[i] - mu) * inv;
            }
            gb.v[static_cast<std::size_t>(ch)] += sum_g;
            gg.v[static_cast<std::size_t>(ch)] += sum_gx;
            double mg = sum_g / static_cast<double>(n);
            double mgx = sum_gx / static_cast<double>(n);
            double* gxc = gx.v.data() + static_cast<std::size_t>(ch) * n;
            for (std::size_t i = 0; i < n; ++i) {
                double xhat = (xc[i] - mu) * inv;
                gxc[i] += gam * inv * (gc[i] - mg - xhat * mgx);
            }
        }
    });
}

// ---- pooling / attention helpers ----

int global_max(Tape& t, int x) {
    const Tensor& tx = t.val(x);
    int c = tx.dim(0);
    std::size_t n = tx.numel() / static_cast<std::size_t>(c);
    require(n >= 1, "global_max: empty spatial extent");
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        const double* xc = tx.v.data() + static_cast<std::size_t>(ch) * n;
        double m = xc[0];
        for (std::size_t i = 1; i < n; ++i) m = std::max(m, xc[i]);
        out.v[static_cast<std::size_t>(ch)] = m;
    }
    return t.push(std::move(out), [x, c, n](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& tx2 = tp.val(x);
        Tensor& gx = tp.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            const double* xc = tx2.v.data() + static_cast<std::size_t>(ch) * n;
            std::size_t arg = 0;
            for (std::size_t i = 1; i < n; ++i)
                if (xc[i] > xc[arg]) arg = i;
            gx.v[static_cast<std::size_t>(ch) * n + arg] += g.v[static_cast<std::size_t>(ch)];
        }
    });
}

int global_avg(Tape& t, int x) {
    const Tensor& tx = t.val(x);
    int c = tx.dim(0);
    std::size_t n = tx.numel() / static_cast<std::size_t>(c);
    Tensor out({c});
    for (int ch = 0; ch < c; ++ch) {
        const double* xc = tx.v.data() + static_cast<std::size_t>(ch) * n;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += xc[i];
        out.v[static_cast<std::size_t>(ch)] = s / static_cast<double>(n);
    }
    return t.push(std::move(out), [x, c, n](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (int ch = 0; ch < c; ++ch) {
            double gi = g.v[static_cast<std::size_t>(ch)] / static_cast<double>(n);
            double* gxc = gx.v.data() + static_cast<std::size_t>(ch) * n;
            for (std::size_t i = 0; i < n; ++i) gxc[i] += gi;
        }
    });
}

int channel_max(Tape& t, int x) {
    const Tensor& tx = t.val(x);
    int c = tx.dim(0);
    std::size_t n = tx.numel() / static_cast<std::size_t>(c);
    std::vector<int> oshape = tx.shape;
    oshape[0] = 1;
    Tensor out(oshape);
    for (std::size_t i = 0; i < n; ++i) {
        double m = tx.v[i];
        for (int ch = 1; ch < c; ++ch) m = std::max(m, tx.v[static_cast<std::size_t>(ch) * n + i]);
        out.v[i] = m;
    }
    return t.push(std::move(out), [x, c, n](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        const Tensor& tx2 = tp.val(x);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < n; ++i) {
            int arg = 0;
            for (int ch = 1; ch < c; ++ch)
                if (tx2.v[static_cast<std::size_t>(ch) * n + i] > tx2.v[static_cast<std::size_t>(arg) * n + i])
                    arg = ch;
            gx.v[static_cast<std::size_t>(arg) * n + i] += g.v[i];
        }
    });
}

int channel_avg(Tape& t, int x) {
    const Tensor& tx = t.val(x);
    int c = tx.dim(0);
    std::size_t n = tx.numel() / static_cast<std::size_t>(c);
    std::vector<int> oshape = tx.shape;
    oshape[0] = 1;
    Tensor out(oshape);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (int ch = 0; ch < c; ++ch) s += tx.v[static_cast<std::size_t>(ch) * n + i];
        out.v[i] = s / c;
    }
    return t.push(std::move(out), [x, c, n](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t i = 0; i < n; ++i) {
            double gi = g.v[i] / c;
            for (int ch = 0; ch < c; ++ch) gx.v[static_cast<std::size_t>(ch) * n + i] += gi;
        }
    });
}

namespace {

struct AxisSplit {
    std::size_t outer, inner;
    int len;
};

AxisSplit axis_split(const Tensor& x, int axis) {
    require(axis >= 0 && axis < x.rank(), "axis outside rank for " + shape_str(x.shape));
    AxisSplit s;
    s.len = x.dim(axis);
    s.outer = 1;
    for (int i = 0; i < axis; ++i) s.outer *= static_cast<std::size_t>(x.dim(i));
    s.inner = 1;
    for (int i = axis + 1; i < x.rank(); ++i) s.inner *= static_cast<std::size_t>(x.dim(i));
    return s;
}

}  // namespace

int avgpool2_axis(Tape& t, int x, int axis) {
    const Tensor& tx = t.val(x);
    AxisSplit sp = axis_split(tx, axis);
    int lo = (sp.len + 1) / 2;
    std::vector<int> oshape = tx.shape;
    oshape[static_cast<std::size_t>(axis)] = lo;
    Tensor out(oshape);
    for (std::size_t po = 0; po < sp.outer; ++po) {
        for (int to = 0; to < lo; ++to) {
            for (std::size_t pi = 0; pi < sp.inner; ++pi) {
                std::size_t i0 = (po * static_cast<std::size_t>(sp.len) + 2 * static_cast<std::size_t>(to)) * sp.inner + pi;
                std::size_t oi = (po * static_cast<std::size_t>(lo) + static_cast<std::size_t>(to)) * sp.inner + pi;
                if (2 * to + 1 < sp.len)
                    out.v[oi] = 0.5 * (tx.v[i0] + tx.v[i0 + sp.inner]);
                else
                    out.v[oi] = tx.v[i0];
            }
        }
    }
    return t.push(std::move(out), [x, sp, lo](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t po = 0; po < sp.outer; ++po) {
            for (int to = 0; to < lo; ++to) {
                for (std::size_t pi = 0; pi < sp.inner; ++pi) {
                    std::size_t i0 = (po * static_cast<std::size_t>(sp.len) + 2 * static_cast<std::size_t>(to)) * sp.inner + pi;
                    std::size_t oi = (po * static_cast<std::size_t>(lo) + static_cast<std::size_t>(to)) * sp.inner + pi;
                    if (2 * to + 1 < sp.len) {
                        gx.v[i0] += 0.5 * g.v[oi];
                        gx.v[i0 + sp.inner] += 0.5 * g.v[oi];
                    } else {
                        gx.v[i0] += g.v[oi];
                    }
                }
            }
        }
    });
}

int upsample2_axis(Tape& t, int x, int axis, int target) {
    const Tensor& tx = t.val(x);
    AxisSplit sp = axis_split(tx, axis);
    require(target == 2 * sp.len || target == 2 * sp.len - 1,
            "upsample2_axis: target " + std::to_string(target) + " does not match source length " +
                std::to_string(sp.len));
    std::vector<int> oshape = tx.shape;
    oshape[static_cast<std::size_t>(axis)] = target;
    Tensor out(oshape);
    for (std::size_t po = 0; po < sp.outer; ++po) {
        for (int to = 0; to < target; ++to) {
            std::size_t si = (po * static_cast<std::size_t>(sp.len) + static_cast<std::size_t>(to / 2)) * sp.inner;
            std::size_t oi = (po * static_cast<std::size_t>(target) + static_cast<std::size_t>(to)) * sp.inner;
            for (std::size_t pi = 0; pi < sp.inner; ++pi) out.v[oi + pi] = tx.v[si + pi];
        }
    }
    return t.push(std::move(out), [x, sp, target](Tape& tp, int self) {
        const Tensor& g = tp.grad(self);
        Tensor& gx = tp.grad(x);
        for (std::size_t po = 0; po < sp.outer; ++po) {
            for (int to = 0; to < target; ++to) {
                std::size_t si = (po * static_cast<std::size_t>(sp.len) + static_cast<std::size_t>(to / 2)) * sp.inner;
                std::size_t oi = (po * static_cast<std::size_t>(target) + static_cast<std::size_t>(to)) * sp.inner;
                for (std::size_t pi = 0; pi < sp.inner; ++pi) gx.v[si + pi] += g.v[oi + pi];
            }
        }
    });
}

int mse(Tape& t, int a, int b) {
    const Tensor& ta = t.val(a);
    const Tensor& tb = t.val(b);
    require(ta.shape == tb.shape, "mse: shape mismatch " + shape_str(ta.shape) + " vs " + shape_str(tb.shape));
    std::size_t n = ta.numel();
    KahanSum s;
    for (std::size_t i = 0; i < n; ++i) {
        double d = ta.v[i] - tb.v[i];
        s.add(d * d);
    }
    return t.push(Tensor::scalar(s.value() / static_cast<double>(n)), [a, b, n](Tape& tp, int self) {
        double g = tp.grad(self).v[0] * 2.0 / static_cast<double>(n);
        const Tensor& ta2 = tp.val(a);
        const Tensor& tb2 = tp.val(b);
        Tensor& ga = tp.grad(a);
        Tensor& gb = tp.grad(b);
        for (std::size_t i = 0; i < n; ++i) {
            double d = g * (ta2.v[i] - tb2.v[i]);
            ga.v[i] += d;
            gb.v[i] -= d;
        }
    });
}

std::string GradCheckReport::str() const {
    std::ostringstream os;
    os << "max rel err " << max_rel_err << " at input " << worst_input << " index " << worst_index
       << " (analytic " << analytic << ", numeric " << numeric << ")";
    return os.str();
}

GradCheckReport gradient_check(const std::function<int(Tape&, const std::vector<int>&)>& build,
                               std::vector<Tensor> inputs, double step) {
    GradCheckReport rep;

    Tape tape;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Tensor& in : inputs) ids.push_back(tape.leaf(in));
    int loss = build(tape, ids);
    tape.backward(loss);

    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        analytic.push_back(tape.has_grad(ids[i]) ? tape.grad(ids[i])
                                                 : Tensor::zeros(inputs[i].shape));
    }

    auto eval = [&](const std::vector<Tensor>& ins) {
        Tape tp;
        std::vector<int> lids;
        lids.reserve(ins.size());
        for (const Tensor& in : ins) lids.push_back(tp.leaf(in));
        return tp.val(build(tp, lids)).v[0];
    };

    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t e = 0; e < inputs[i].numel(); ++e) {
            double keep = inputs[i].v[e];
            inputs[i].v[e] = keep + step;
            double fp = eval(inputs);
            inputs[i].v[e] = keep - step;
            double fm = eval(inputs);
            inputs[i].v[e] = keep;
            double num = (fp - fm) / (2.0 * step);
            double ana = analytic[i].v[e];
            double rel = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-6});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_input = static_cast<int>(i);
                rep.worst_index = e;
                rep.analytic = ana;
                rep.numeric = num;
            }
        }
    }
    return rep;
}

}  // namespace msct
