#include "avgq/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "avgq/errors.hpp"

namespace avgq {

Mdp::Mdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transitions,
         std::vector<double> costs, State ref_state, GeneratorInfo generator)
    : d_(num_states), r_(num_actions), p_(std::move(transitions)), k_(std::move(costs)),
      i0_(ref_state), gen_(std::move(generator)) {
    if (d_ == 0 || r_ == 0) {
        throw DimensionError("mdp: num_states and num_actions must be positive");
    }
    if (p_.size() != d_ * r_ * d_) {
        throw DimensionError("mdp: transition tensor has " + std::to_string(p_.size()) +
                             " entries, expected " + std::to_string(d_ * r_ * d_));
    }
    if (k_.size() != d_ * r_) {
        throw DimensionError("mdp: cost table has " + std::to_string(k_.size()) +
                             " entries, expected " + std::to_string(d_ * r_));
    }
    if (i0_ >= d_) {
        throw IndexError("mdp: reference state " + std::to_string(i0_) + " out of range");
    }
}

double Mdp::max_abs_cost() const noexcept {
    double m = 0.0;
    for (double c : k_) m = std::max(m, std::abs(c));
    return m;
}

double Mdp::min_cost() const noexcept { return *std::min_element(k_.begin(), k_.end()); }

double Mdp::max_cost() const noexcept { return *std::max_element(k_.begin(), k_.end()); }

ValidationReport validate_mdp(const Mdp& mdp) {
    const std::size_t d = mdp.num_states();
    const std::size_t r = mdp.num_actions();
    if (mdp.transitions().size() != d * r * d || mdp.costs().size() != d * r || d == 0) {
        throw DimensionError("validate_mdp: inconsistent tensor dimensions");
    }

    ValidationReport rep;
    for (State i = 0; i < d; ++i) {
        for (Action u = 0; u < r; ++u) {
            double sum = 0.0;
            bool finite = true;
            for (double x : mdp.row(i, u)) {
                sum += x;
                if (!std::isfinite(x)) finite = false;
                if (x < 0.0 && rep.nonneg_ok) {
                    rep.nonneg_ok = false;
                    rep.messages.push_back("negative transition probability in row (" +
                                           std::to_string(i) + "," + std::to_string(u) + ")");
                }
            }
            if (!finite) {
                rep.messages.push_back("non-finite transition probability in row (" +
                                       std::to_string(i) + "," + std::to_string(u) + ")");
                rep.row_sum_max_deviation = INFINITY;
                continue;
            }
            const double dev = std::abs(sum - 1.0);
            rep.row_sum_max_deviation = std::max(rep.row_sum_max_deviation, dev);
            if (dev > kStochasticTol) {
                rep.messages.push_back("row (" + std::to_string(i) + "," + std::to_string(u) +
                                       ") sums to " + format_double(sum));
            }
            if (!std::isfinite(mdp.cost(i, u))) {
                rep.messages.push_back("non-finite cost at (" + std::to_string(i) + "," +
                                       std::to_string(u) + ")");
            }
        }
    }
    if (mdp.ref_state() >= d) {
        rep.messages.push_back("reference state out of range");
    }
    rep.proper_ok = check_all_policies_proper(mdp);
    if (!rep.proper_ok) {
        rep.messages.push_back("some stationary policy never reaches the reference state");
    }
    return rep;
}

bool check_all_policies_proper(const Mdp& mdp) {
    const std::size_t d = mdp.num_states();
    const std::size_t r = mdp.num_actions();
    std::vector<char> in_set(d, 0);
    in_set[mdp.ref_state()] = 1;
    std::size_t count = 1;

    bool grew = true;
    while (grew && count < d) {
        grew = false;
        for (State i = 0; i < d; ++i) {
            if (in_set[i]) continue;
            bool every_action_enters = true;
            for (Action u = 0; u < r && every_action_enters; ++u) {
                const auto row = mdp.row(i, u);
                bool enters = false;
                for (State j = 0; j < d; ++j) {
                    if (in_set[j] && row[j] > 0.0) {
                        enters = true;
                        break;
                    }
                }
                every_action_enters = enters;
            }
            if (every_action_enters) {
                in_set[i] = 1;
                ++count;
                grew = true;
            }
        }
    }
    return count == d;
}

namespace {

void check_policy(const Mdp& mdp, const Policy& policy) {
    if (policy.action.size() != mdp.num_states()) {
        throw DimensionError("policy length " + std::to_string(policy.action.size()) +
                             " does not match " + std::to_string(mdp.num_states()) + " states");
    }
    for (Action a : policy.action) {
        if (a >= mdp.num_actions()) throw IndexError("policy action out of range");
    }
}

}  // namespace

std::vector<double> policy_transition_matrix(const Mdp& mdp, const Policy& policy) {
    check_policy(mdp, policy);
    const std::size_t d = mdp.num_states();
    std::vector<double> P(d * d);
    for (State i = 0; i < d; ++i) {
        const auto row = mdp.row(i, policy.action[i]);
        std::copy(row.begin(), row.end(), P.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return P;
}

std::vector<double> stationary_distribution(const Mdp& mdp, const Policy& policy) {
    const auto d = static_cast<Eigen::Index>(mdp.num_states());
    const auto flat = policy_transition_matrix(mdp, policy);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        P(flat.data(), d, d);

    // (P^T - I) pi = 0 with the last balance equation replaced by sum(pi) = 1.
    Eigen::MatrixXd A = P.transpose() - Eigen::MatrixXd::Identity(d, d);
    A.row(d - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    b(d - 1) = 1.0;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) {
        throw SolverFailure("stationary_distribution: singular balance system (chain not unichain)");
    }
    Eigen::VectorXd pi = lu.solve(b);

    for (Eigen::Index i = 0; i < d; ++i) {
        if (pi(i) < -kStationaryTol) {
            throw SolverFailure("stationary_distribution: negative mass " + format_double(pi(i)));
        }
        pi(i) = std::max(pi(i), 0.0);
    }
    pi /= pi.sum();

    const double residual = (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff();
    if (residual > kStationaryTol) {
        throw SolverFailure("stationary_distribution: residual " + format_double(residual));
    }
    return {pi.data(), pi.data() + d};
}

double average_cost_of_policy(const Mdp& mdp, const Policy& policy) {
    const auto pi = stationary_distribution(mdp, policy);
    double cost = 0.0;
    for (State i = 0; i < mdp.num_states(); ++i) cost += pi[i] * mdp.cost(i, policy.action[i]);
    return cost;
}

State sample_transition(const Mdp& mdp, State i, Action u, Rng& rng) {
    if (i >= mdp.num_states() || u >= mdp.num_actions()) {
        throw IndexError("sample_transition: (" + std::to_string(i) + "," + std::to_string(u) +
                         ") out of range");
    }
    const auto row = mdp.row(i, u);
    const double x = rng.uniform();
    double cum = 0.0;
    State last_positive = 0;
    for (State j = 0; j < row.size(); ++j) {
        if (row[j] <= 0.0) continue;
        cum += row[j];
        last_positive = j;
        if (x < cum) return j;
    }
    // Rounding left cum slightly below one.
    return last_positive;
}

namespace {

struct RawDraw {
    std::vector<double> p;
    std::vector<double> k;
};

RawDraw draw_uniform_tables(std::size_t d, std::size_t r, std::uint64_t seed) {
    Rng rng(seed);
    RawDraw raw{std::vector<double>(d * r * d), std::vector<double>(d * r)};
    for (double& x : raw.p) x = rng.uniform();
    for (double& x : raw.k) x = rng.uniform();
    return raw;
}

void normalise_rows(std::vector<double>& p, std::size_t d, std::size_t r) {
    for (std::size_t row = 0; row < d * r; ++row) {
        double sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) sum += p[row * d + j];
        if (!(sum > 0.0)) throw Error("generator: row " + std::to_string(row) + " has no mass");
        for (std::size_t j = 0; j < d; ++j) p[row * d + j] /= sum;
    }
}

void check_generator_args(std::size_t d, std::size_t r) {
    if (d < 2) throw ConfigError("generator: need at least 2 states");
    if (r < 1) throw ConfigError("generator: need at least 1 action");
}

}  // namespace

Mdp generate_dense_random_mdp(std::size_t d, std::size_t r, std::uint64_t seed) {
    check_generator_args(d, r);
    auto raw = draw_uniform_tables(d, r, seed);
    normalise_rows(raw.p, d, r);
    return Mdp(d, r, std::move(raw.p), std::move(raw.k), 0, GeneratorInfo{"dense", seed, 0.0});
}

Mdp generate_sparse_random_mdp(std::size_t d, std::size_t r, double zero_fraction,
                               std::uint64_t seed) {
    check_generator_args(d, r);
    if (!(zero_fraction >= 0.0 && zero_fraction < 1.0)) {
        throw ConfigError("generator: zero_fraction must lie in [0, 1)");
    }
    auto raw = draw_uniform_tables(d, r, seed);
    Rng mask(derive_seed(seed, 1));
    for (State i = 1; i < d; ++i) {
        for (Action u = 0; u < r; ++u) {
            for (State j = 1; j < d; ++j) {
                if (mask.uniform() < zero_fraction) raw.p[(i * r + u) * d + j] = 0.0;
            }
        }
    }
    normalise_rows(raw.p, d, r);
    return Mdp(d, r, std::move(raw.p), std::move(raw.k), 0,
               GeneratorInfo{"sparse", seed, zero_fraction});
}

// ---------------------------------------------------------------------------
// Text format

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return {buf, res.ptr};
}

namespace {

constexpr const char* kMagic = "avgq-mdp";
constexpr int kVersion = 1;

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    /// Next non-blank, non-comment line split on whitespace.
    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            std::istringstream ss(line);
            std::vector<std::string> tok;
            for (std::string t; ss >> t;) tok.push_back(std::move(t));
            if (!tok.empty()) return tok;
        }
        throw ParseError("unexpected end of file", lineno_);
    }

    std::vector<std::string> expect(const std::string& key, std::size_t values) {
        auto tok = next();
        if (tok[0] != key || tok.size() != values + 1) {
            throw ParseError("expected '" + key + "' with " + std::to_string(values) +
                                 " value(s), got '" + tok[0] + "'",
                             lineno_);
        }
        return tok;
    }

    long line() const noexcept { return lineno_; }

private:
    std::istream& in_;
    long lineno_ = 0;
};

double parse_double(const std::string& s, long line) {
    double x = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid number '" + s + "'", line);
    }
    return x;
}

std::uint64_t parse_uint(const std::string& s, long line) {
    std::uint64_t x = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError("invalid integer '" + s + "'", line);
    }
    return x;
}

}  // namespace

void write_mdp(std::ostream& out, const Mdp& mdp) {
    const std::size_t d = mdp.num_states();
    const std::size_t r = mdp.num_actions();
    out << kMagic << ' ' << kVersion << '\n';
    out << "states " << d << '\n';
    out << "actions " << r << '\n';
    out << "ref_state " << mdp.ref_state() << '\n';
    out << "generator " << mdp.generator().kind << '\n';
    out << "seed " << mdp.generator().seed << '\n';
    out << "zero_fraction " << format_double(mdp.generator().zero_fraction) << '\n';
    out << "transitions\n";
    for (State i = 0; i < d; ++i) {
        for (Action u = 0; u < r; ++u) {
            const auto row = mdp.row(i, u);
            for (State j = 0; j < d; ++j) out << (j ? " " : "") << format_double(row[j]);
            out << '\n';
        }
    }
    out << "costs\n";
    for (State i = 0; i < d; ++i) {
        for (Action u = 0; u < r; ++u) out << (u ? " " : "") << format_double(mdp.cost(i, u));
        out << '\n';
    }
    out << "end\n";
}

Mdp read_mdp(std::istream& in) {
    LineReader rd(in);
    auto head = rd.next();
    if (head.size() != 2 || head[0] != kMagic) throw ParseError("missing avgq-mdp header", rd.line());
    if (parse_uint(head[1], rd.line()) != kVersion) {
        throw ParseError("unsupported format version " + head[1], rd.line());
    }
    const auto d = parse_uint(rd.expect("states", 1)[1], rd.line());
    const auto r = parse_uint(rd.expect("actions", 1)[1], rd.line());
    const auto i0 = parse_uint(rd.expect("ref_state", 1)[1], rd.line());
    if (d == 0 || r == 0) throw ParseError("dimensions must be positive", rd.line());
    if (d > 100000 || d * d * r > (std::uint64_t{1} << 32)) {
        throw ParseError("dimensions too large", rd.line());
    }
    GeneratorInfo gen;
    gen.kind = rd.expect("generator", 1)[1];
    gen.seed = parse_uint(rd.expect("seed", 1)[1], rd.line());
    gen.zero_fraction = parse_double(rd.expect("zero_fraction", 1)[1], rd.line());

    rd.expect("transitions", 0);
    std::vector<double> p;
    p.reserve(d * r * d);
    for (std::uint64_t row = 0; row < d * r; ++row) {
        const auto tok = rd.next();
        if (tok.size() != d) {
            throw ParseError("transition row has " + std::to_string(tok.size()) +
                                 " entries, expected " + std::to_string(d),
                             rd.line());
        }
        for (const auto& t : tok) p.push_back(parse_double(t, rd.line()));
    }
    rd.expect("costs", 0);
    std::vector<double> k;
    k.reserve(d * r);
    for (std::uint64_t i = 0; i < d; ++i) {
        const auto tok = rd.next();
        if (tok.size() != r) {
            throw ParseError("cost row has " + std::to_string(tok.size()) + " entries, expected " +
                                 std::to_string(r),
                             rd.line());
        }
        for (const auto& t : tok) k.push_back(parse_double(t, rd.line()));
    }
    rd.expect("end", 0);
    if (i0 >= d) throw ParseError("ref_state out of range", rd.line());
    return Mdp(d, r, std::move(p), std::move(k), i0, std::move(gen));
}

void save_mdp(const std::string& path, const Mdp& mdp) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_mdp(out, mdp);
    if (!out) throw Error("write to '" + path + "' failed");
}

Mdp load_mdp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    return read_mdp(in);
}

}  // namespace avgq
