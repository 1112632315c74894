#include "ocrpost/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ocrpost/errors.hpp"

namespace ocrpost::numkit {

size_t shape_numel(const Shape& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
        throw ShapeMismatch("tensor data length " + std::to_string(data_.size()) +
                            " does not match shape " + shape_str(shape_));
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(shape_numel(shape_), 0.0);
}

const Tensor& Var::value() const { return tape->value(*this); }

// Single access point the free-function ops use to reach tape internals.
struct OpAccess {
    static Var make_node(Tape& t, Tensor value, std::function<void(Tape&)> back) {
        for (double v : value.data())
            if (!std::isfinite(v)) throw NonFiniteValue("non-finite value in primitive output");
        t.nodes_.push_back({std::move(value), {}, std::move(back)});
        return Var{&t, t.nodes_.size() - 1};
    }
    static const std::vector<double>& grad_of(Tape& t, size_t id) { return t.nodes_[id].grad; }
    static void accumulate(Tape& t, size_t id, const std::vector<double>& g) {
        t.accumulate(id, g);
    }
    static std::vector<double>& grad_buffer(Tape& t, size_t id) { return t.grad_buffer(id); }
    static const Tensor& val(const Tape& t, size_t id) { return t.nodes_[id].value; }
};

Var Tape::leaf(Tensor value) {
    return OpAccess::make_node(*this, std::move(value), nullptr);
}

const Tensor& Tape::value(Var v) const {
    if (v.tape != this) throw Error("Var belongs to a different tape");
    return nodes_[v.id].value;
}

std::vector<double>& Tape::grad_buffer(size_t id) {
    auto& g = nodes_[id].grad;
    if (g.empty()) g.assign(nodes_[id].value.numel(), 0.0);
    return g;
}

void Tape::accumulate(size_t id, const std::vector<double>& g) {
    auto& buf = grad_buffer(id);
    for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw Error("Var belongs to a different tape");
    if (nodes_[loss.id].value.numel() != 1)
        throw NotScalar("backward: loss has " + std::to_string(nodes_[loss.id].value.numel()) +
                        " elements");
    grad_buffer(loss.id)[0] = 1.0;
    for (size_t i = loss.id + 1; i-- > 0;) {
        auto& node = nodes_[i];
        if (node.grad.empty() || !node.back) continue;
        node.back(*this);
    }
}

Tensor Tape::grad(Var v) const {
    if (v.tape != this) throw Error("Var belongs to a different tape");
    const auto& node = nodes_[v.id];
    if (node.grad.empty()) return Tensor(node.value.shape());
    return Tensor(node.value.shape(), node.grad);
}

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeMismatch(msg);
}

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw Error("operands live on different tapes");
}

const Tensor& val(Var v) { return OpAccess::val(*v.tape, v.id); }

}  // namespace

Var add(Var a, Var b) {
    require_same_tape(a, b);
    require(val(a).shape() == val(b).shape(),
            "add: shapes " + shape_str(val(a).shape()) + " vs " + shape_str(val(b).shape()));
    Tensor out(val(a).shape());
    const auto &da = val(a).data(), &db = val(b).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = da[i] + db[i];
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        OpAccess::accumulate(t, ia, g);
        OpAccess::accumulate(t, ib, g);
    });
}

Var sub(Var a, Var b) {
    require_same_tape(a, b);
    require(val(a).shape() == val(b).shape(),
            "sub: shapes " + shape_str(val(a).shape()) + " vs " + shape_str(val(b).shape()));
    Tensor out(val(a).shape());
    const auto &da = val(a).data(), &db = val(b).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = da[i] - db[i];
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        OpAccess::accumulate(t, ia, g);
        auto& gb = OpAccess::grad_buffer(t, ib);
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
}

Var mul(Var a, Var b) {
    require_same_tape(a, b);
    require(val(a).shape() == val(b).shape(),
            "mul: shapes " + shape_str(val(a).shape()) + " vs " + shape_str(val(b).shape()));
    Tensor out(val(a).shape());
    const auto &da = val(a).data(), &db = val(b).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = da[i] * db[i];
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& xa = OpAccess::val(t, ia).data();
        const auto& xb = OpAccess::val(t, ib).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        auto& gb = OpAccess::grad_buffer(t, ib);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * xb[i];
            gb[i] += g[i] * xa[i];
        }
    });
}

Var scale(Var a, double c) {
    Tensor out(val(a).shape());
    const auto& da = val(a).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = c * da[i];
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, c, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const auto& sa = val(a).shape();
    const auto& sb = val(b).shape();
    require(sa.size() == 2, "matmul: left operand must be 2-D, got " + shape_str(sa));
    const size_t m = sa[0], k = sa[1];
    if (sb.size() == 1) {
        require(sb[0] == k, "matmul: " + shape_str(sa) + " x " + shape_str(sb));
        Tensor out(Shape{m});
        const auto &A = val(a).data(), &x = val(b).data();
        for (size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            const double* row = A.data() + i * k;
            for (size_t j = 0; j < k; ++j) acc += row[j] * x[j];
            out.at(i) = acc;
        }
        const size_t ia = a.id, ib = b.id;
        const size_t self = a.tape->size();
        return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, m, k, self](Tape& t) {
            const auto& g = OpAccess::grad_of(t, self);
            const auto& A = OpAccess::val(t, ia).data();
            const auto& x = OpAccess::val(t, ib).data();
            auto& gA = OpAccess::grad_buffer(t, ia);
            auto& gx = OpAccess::grad_buffer(t, ib);
            for (size_t i = 0; i < m; ++i) {
                const double gi = g[i];
                double* gArow = gA.data() + i * k;
                const double* Arow = A.data() + i * k;
                for (size_t j = 0; j < k; ++j) {
                    gArow[j] += gi * x[j];
                    gx[j] += gi * Arow[j];
                }
            }
        });
    }
    require(sb.size() == 2 && sb[0] == k, "matmul: " + shape_str(sa) + " x " + shape_str(sb));
    const size_t n = sb[1];
    Tensor out(Shape{m, n});
    {
        const auto &A = val(a).data(), &B = val(b).data();
        for (size_t i = 0; i < m; ++i) {
            const double* Arow = A.data() + i * k;
            double* orow = out.data().data() + i * n;
            for (size_t kk = 0; kk < k; ++kk) {
                const double av = Arow[kk];
                const double* Brow = B.data() + kk * n;
                for (size_t j = 0; j < n; ++j) orow[j] += av * Brow[j];
            }
        }
    }
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, m, k, n, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& A = OpAccess::val(t, ia).data();
        const auto& B = OpAccess::val(t, ib).data();
        auto& gA = OpAccess::grad_buffer(t, ia);
        auto& gB = OpAccess::grad_buffer(t, ib);
        // gA = g * B^T ; gB = A^T * g
        for (size_t i = 0; i < m; ++i) {
            const double* grow = g.data() + i * n;
            double* gArow = gA.data() + i * k;
            const double* Arow = A.data() + i * k;
            for (size_t kk = 0; kk < k; ++kk) {
                const double* Brow = B.data() + kk * n;
                double acc = 0.0;
                for (size_t j = 0; j < n; ++j) acc += grow[j] * Brow[j];
                gArow[kk] += acc;
                const double av = Arow[kk];
                double* gBrow = gB.data() + kk * n;
                for (size_t j = 0; j < n; ++j) gBrow[j] += av * grow[j];
            }
        }
    });
}

Var transpose(Var a) {
    const auto& sa = val(a).shape();
    require(sa.size() == 2, "transpose: operand must be 2-D, got " + shape_str(sa));
    const size_t m = sa[0], n = sa[1];
    Tensor out(Shape{n, m});
    const auto& A = val(a).data();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out.at(j * m + i) = A[i * n + j];
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, m, n, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < m; ++i)
            for (size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat: no operands");
    size_t total = 0;
    for (const auto& p : parts) {
        require(val(p).shape().size() == 1, "concat: operands must be 1-D");
        require_same_tape(parts[0], p);
        total += val(p).numel();
    }
    Tensor out(Shape{total});
    std::vector<size_t> ids, offs;
    size_t off = 0;
    for (const auto& p : parts) {
        const auto& d = val(p).data();
        std::copy(d.begin(), d.end(), out.data().begin() + off);
        ids.push_back(p.id);
        offs.push_back(off);
        off += d.size();
    }
    Tape& tape = *parts[0].tape;
    const size_t self = tape.size();
    return OpAccess::make_node(tape, std::move(out), [ids, offs, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        for (size_t p = 0; p < ids.size(); ++p) {
            auto& gp = OpAccess::grad_buffer(t, ids[p]);
            for (size_t i = 0; i < gp.size(); ++i) gp[i] += g[offs[p] + i];
        }
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeMismatch("stack_rows: no operands");
    const size_t d = val(rows[0]).numel();
    for (const auto& r : rows) {
        require(val(r).shape().size() == 1 && val(r).numel() == d,
                "stack_rows: rows must be 1-D of equal length");
        require_same_tape(rows[0], r);
    }
    Tensor out(Shape{rows.size(), d});
    std::vector<size_t> ids;
    for (size_t i = 0; i < rows.size(); ++i) {
        const auto& rd = val(rows[i]).data();
        std::copy(rd.begin(), rd.end(), out.data().begin() + i * d);
        ids.push_back(rows[i].id);
    }
    Tape& tape = *rows[0].tape;
    const size_t self = tape.size();
    return OpAccess::make_node(tape, std::move(out), [ids, d, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        for (size_t r = 0; r < ids.size(); ++r) {
            auto& gr = OpAccess::grad_buffer(t, ids[r]);
            for (size_t i = 0; i < d; ++i) gr[i] += g[r * d + i];
        }
    });
}

Var slice(Var a, size_t begin, size_t end) {
    const auto& sa = val(a).shape();
    require(sa.size() == 1 || sa.size() == 2, "slice: operand must be 1-D or 2-D");
    const size_t limit = sa[0];
    require(begin <= end && end <= limit, "slice: range [" + std::to_string(begin) + "," +
                                              std::to_string(end) + ") out of bounds for " +
                                              shape_str(sa));
    const size_t width = sa.size() == 2 ? sa[1] : 1;
    Shape out_shape = sa.size() == 2 ? Shape{end - begin, sa[1]} : Shape{end - begin};
    Tensor out(out_shape);
    const auto& d = val(a).data();
    std::copy(d.begin() + begin * width, d.begin() + end * width, out.data().begin());
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, begin, width, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < g.size(); ++i) ga[begin * width + i] += g[i];
    });
}

Var embedding_lookup(Var table, size_t row) {
    const auto& st = val(table).shape();
    require(st.size() == 2, "embedding_lookup: table must be 2-D, got " + shape_str(st));
    require(row < st[0], "embedding_lookup: row " + std::to_string(row) + " out of range " +
                             shape_str(st));
    const size_t e = st[1];
    Tensor out(Shape{e});
    const auto& d = val(table).data();
    std::copy(d.begin() + row * e, d.begin() + (row + 1) * e, out.data().begin());
    const size_t it = table.id;
    const size_t self = table.tape->size();
    return OpAccess::make_node(*table.tape, std::move(out), [it, row, e, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        auto& gt = OpAccess::grad_buffer(t, it);
        for (size_t i = 0; i < e; ++i) gt[row * e + i] += g[i];
    });
}

Var pick(Var a, size_t index) {
    const auto& sa = val(a).shape();
    require(sa.size() == 1, "pick: operand must be 1-D, got " + shape_str(sa));
    require(index < sa[0], "pick: index out of range");
    Tensor out = Tensor::scalar(val(a).at(index));
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, index, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        OpAccess::grad_buffer(t, ia)[index] += g[0];
    });
}

Var sigmoid(Var a) {
    Tensor out(val(a).shape());
    const auto& d = val(a).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = 1.0 / (1.0 + std::exp(-d[i]));
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& y = OpAccess::val(t, self).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var tanh(Var a) {
    Tensor out(val(a).shape());
    const auto& d = val(a).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = std::tanh(d[i]);
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& y = OpAccess::val(t, self).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

namespace {

void softmax_block(const double* in, double* out, size_t n, size_t stride) {
    double mx = in[0];
    for (size_t i = 1; i < n; ++i) mx = std::max(mx, in[i * stride]);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double e = std::exp(in[i * stride] - mx);
        out[i * stride] = e;
        sum += e;
    }
    for (size_t i = 0; i < n; ++i) out[i * stride] /= sum;
}

void softmax_block_grad(const double* y, const double* g, double* ga, size_t n, size_t stride) {
    double dotv = 0.0;
    for (size_t i = 0; i < n; ++i) dotv += y[i * stride] * g[i * stride];
    for (size_t i = 0; i < n; ++i) ga[i * stride] += y[i * stride] * (g[i * stride] - dotv);
}

}  // namespace

Var softmax(Var a) {
    const auto& sa = val(a).shape();
    require(sa.size() == 1, "softmax: operand must be 1-D (use softmax(a, axis) for 2-D)");
    Tensor out(sa);
    softmax_block(val(a).data().data(), out.data().data(), sa[0], 1);
    const size_t ia = a.id;
    const size_t n = sa[0];
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, n, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& y = OpAccess::val(t, self).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        softmax_block_grad(y.data(), g.data(), ga.data(), n, 1);
    });
}

Var softmax(Var a, size_t axis) {
    const auto& sa = val(a).shape();
    require(sa.size() == 2, "softmax(axis): operand must be 2-D, got " + shape_str(sa));
    require(axis < 2, "softmax: axis must be 0 or 1");
    const size_t m = sa[0], n = sa[1];
    Tensor out(sa);
    const double* in = val(a).data().data();
    double* o = out.data().data();
    if (axis == 1) {
        for (size_t i = 0; i < m; ++i) softmax_block(in + i * n, o + i * n, n, 1);
    } else {
        for (size_t j = 0; j < n; ++j) softmax_block(in + j, o + j, m, n);
    }
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, m, n, axis, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& y = OpAccess::val(t, self).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        if (axis == 1) {
            for (size_t i = 0; i < m; ++i)
                softmax_block_grad(y.data() + i * n, g.data() + i * n, ga.data() + i * n, n, 1);
        } else {
            for (size_t j = 0; j < n; ++j)
                softmax_block_grad(y.data() + j, g.data() + j, ga.data() + j, m, n);
        }
    });
}

Var elementwise_min(Var a, Var b) {
    require_same_tape(a, b);
    require(val(a).shape() == val(b).shape(), "elementwise_min: shapes " +
                                                  shape_str(val(a).shape()) + " vs " +
                                                  shape_str(val(b).shape()));
    Tensor out(val(a).shape());
    const auto &da = val(a).data(), &db = val(b).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = std::min(da[i], db[i]);
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& xa = OpAccess::val(t, ia).data();
        const auto& xb = OpAccess::val(t, ib).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        auto& gb = OpAccess::grad_buffer(t, ib);
        for (size_t i = 0; i < g.size(); ++i) {
            if (xa[i] <= xb[i])  // ties route to the first operand
                ga[i] += g[i];
            else
                gb[i] += g[i];
        }
    });
}

Var sum(Var a) {
    double acc = 0.0;
    for (double v : val(a).data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[0];
    });
}

Var log(Var a) {
    Tensor out(val(a).shape());
    const auto& d = val(a).data();
    for (size_t i = 0; i < out.numel(); ++i) out.at(i) = std::log(d[i]);
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        const auto& x = OpAccess::val(t, ia).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
}

Var dot(Var a, Var b) {
    require_same_tape(a, b);
    require(val(a).shape().size() == 1 && val(a).shape() == val(b).shape(),
            "dot: operands must be equal-length 1-D");
    double acc = 0.0;
    const auto &da = val(a).data(), &db = val(b).data();
    for (size_t i = 0; i < da.size(); ++i) acc += da[i] * db[i];
    Tensor out = Tensor::scalar(acc);
    const size_t ia = a.id, ib = b.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, ib, self](Tape& t) {
        const double g0 = OpAccess::grad_of(t, self)[0];
        const auto& xa = OpAccess::val(t, ia).data();
        const auto& xb = OpAccess::val(t, ib).data();
        auto& ga = OpAccess::grad_buffer(t, ia);
        auto& gb = OpAccess::grad_buffer(t, ib);
        for (size_t i = 0; i < xa.size(); ++i) {
            ga[i] += g0 * xb[i];
            gb[i] += g0 * xa[i];
        }
    });
}

Var add_rowvec(Var m, Var v) {
    require_same_tape(m, v);
    const auto& sm = val(m).shape();
    const auto& sv = val(v).shape();
    require(sm.size() == 2 && sv.size() == 1 && sv[0] == sm[1],
            "add_rowvec: " + shape_str(sm) + " + " + shape_str(sv));
    const size_t rows = sm[0], cols = sm[1];
    Tensor out(sm);
    const auto &dm = val(m).data(), &dv = val(v).data();
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out.at(i * cols + j) = dm[i * cols + j] + dv[j];
    const size_t im = m.id, iv = v.id;
    const size_t self = m.tape->size();
    return OpAccess::make_node(*m.tape, std::move(out), [im, iv, rows, cols, self](Tape& t) {
        const auto& g = OpAccess::grad_of(t, self);
        OpAccess::accumulate(t, im, g);
        auto& gv = OpAccess::grad_buffer(t, iv);
        for (size_t i = 0; i < rows; ++i)
            for (size_t j = 0; j < cols; ++j) gv[j] += g[i * cols + j];
    });
}

Var reshape(Var a, Shape shape) {
    require(shape_numel(shape) == val(a).numel(),
            "reshape: " + shape_str(val(a).shape()) + " -> " + shape_str(shape));
    Tensor out(std::move(shape), val(a).data());
    const size_t ia = a.id;
    const size_t self = a.tape->size();
    return OpAccess::make_node(*a.tape, std::move(out), [ia, self](Tape& t) {
        OpAccess::accumulate(t, ia, OpAccess::grad_of(t, self));
    });
}

GradCheckResult finite_diff_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& build,
    const std::vector<Tensor>& params, double h) {
    if (h <= 0.0) throw Error("finite_diff_check: h must be positive");

    const auto eval = [&](const std::vector<Tensor>& p) {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(p.size());
        for (const auto& t : p) vars.push_back(tape.leaf(t));
        return build(tape, vars).value().at(0);
    };

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (const auto& t : params) vars.push_back(tape.leaf(t));
        Var loss = build(tape, vars);
        tape.backward(loss);
        for (const auto& v : vars) analytic.push_back(tape.grad(v));
    }

    GradCheckResult result;
    std::vector<Tensor> work = params;
    for (size_t p = 0; p < params.size(); ++p) {
        for (size_t i = 0; i < params[p].numel(); ++i) {
            const double orig = work[p].at(i);
            work[p].at(i) = orig + h;
            const double fp = eval(work);
            work[p].at(i) = orig - h;
            const double fm = eval(work);
            work[p].at(i) = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[p].at(i);
            double rel = 0.0;
            const double mag = std::max(std::abs(a), std::abs(numeric));
            if (mag > 1e-7) rel = std::abs(a - numeric) / mag;
            result.max_rel_err = std::max(result.max_rel_err, rel);
            ++result.n_checked;
        }
    }
    return result;
}

// --- checkpoint I/O ---

namespace {

constexpr char kCkptMagic[4] = {'N', 'K', 'P', '1'};

uint8_t host_endianness() {
    const uint16_t probe = 1;
    uint8_t first;
    std::memcpy(&first, &probe, 1);
    return first == 1 ? 1 : 2;  // 1 = little, 2 = big
}

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, Tensor>>& tensors) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path + " for writing");
    f.write(kCkptMagic, 4);
    write_pod(f, host_endianness());
    write_pod(f, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, tensor] : tensors) {
        write_pod(f, static_cast<uint32_t>(name.size()));
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(f, static_cast<uint32_t>(tensor.shape().size()));
        for (size_t d : tensor.shape()) write_pod(f, static_cast<uint64_t>(d));
    }
    for (const auto& [name, tensor] : tensors) {
        (void)name;
        f.write(reinterpret_cast<const char*>(tensor.data().data()),
                static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
    }
    if (!f) throw CheckpointError("short write to " + path);
}

std::vector<std::pair<std::string, Tensor>> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw CheckpointError(path + ": not a parameter checkpoint");
    uint8_t endian = 0;
    read_pod(f, endian);
    if (endian != host_endianness())
        throw CheckpointError(path + ": checkpoint endianness does not match this host");
    uint32_t count = 0;
    read_pod(f, count);
    std::vector<std::pair<std::string, Shape>> headers;
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t name_len = 0;
        read_pod(f, name_len);
        std::string name(name_len, '\0');
        f.read(name.data(), name_len);
        uint32_t rank = 0;
        read_pod(f, rank);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d) {
            uint64_t dim = 0;
            read_pod(f, dim);
            shape[d] = static_cast<size_t>(dim);
        }
        if (!f) throw CheckpointError(path + ": truncated header");
        headers.emplace_back(std::move(name), std::move(shape));
    }
    std::vector<std::pair<std::string, Tensor>> out;
    for (auto& [name, shape] : headers) {
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data().data()),
               static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!f) throw CheckpointError(path + ": truncated data block for " + name);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

void AdamOptimizer::step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size())
        throw LengthMismatch("AdamOptimizer::step: parameter/gradient count mismatch");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (size_t p = 0; p < params.size(); ++p) {
            m_[p].assign(params[p]->numel(), 0.0);
            v_[p].assign(params[p]->numel(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params.size(); ++p) {
        auto& x = params[p]->data();
        const auto& g = grads[p].data();
        if (x.size() != g.size())
            throw ShapeMismatch("AdamOptimizer::step: gradient shape mismatch");
        for (size_t i = 0; i < x.size(); ++i) {
            m_[p][i] = beta1_ * m_[p][i] + (1.0 - beta1_) * g[i];
            v_[p][i] = beta2_ * v_[p][i] + (1.0 - beta2_) * g[i] * g[i];
            const double mh = m_[p][i] / bc1;
            const double vh = v_[p][i] / bc2;
            x[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

}  // namespace ocrpost::numkit
