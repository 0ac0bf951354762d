#include "snpnet/assoc.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "snpnet/error.h"
#include "snpnet/parallel.h"
#include "snpnet/stats.h"

namespace snpnet::assoc
{

namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxIterations = 25;
constexpr double kTolerance = 1e-8;
constexpr double kDivergedSlope = 20.0;

// log(1 + exp(eta)) without overflow
double log1p_exp(double eta)
{
    return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

double log_likelihood(std::span<const double> x, std::span<const double> y, double b0, double b1)
{
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
    {
        const double eta = b0 + b1 * x[i];
        ll += y[i] * eta - log1p_exp(eta);
    }
    return ll;
}

std::string fmt(double v)
{
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return {buf.data(), ptr};
}

}  // namespace

std::string flag_name(FitFlag f)
{
    switch (f)
    {
        case FitFlag::Ok: return "ok";
        case FitFlag::Separation: return "separation";
        case FitFlag::Monomorphic: return "monomorphic";
        case FitFlag::SingleClass: return "single_class";
    }
    return "unknown";
}

LogisticFit fit_logistic_irls(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
    {
        throw Error(Errc::ShapeMismatch, "x and y differ in length");
    }
    LogisticFit fit;
    double b0 = 0.0, b1 = 0.0;
    double ll = log_likelihood(x, y, b0, b1);
    fit.log_likelihood_trace.push_back(ll);

    auto information = [&](double c0, double c1, double& h00, double& h01, double& h11, double& g0, double& g1) {
        h00 = h01 = h11 = g0 = g1 = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const double mu = 1.0 / (1.0 + std::exp(-(c0 + c1 * x[i])));
            const double w = mu * (1.0 - mu);
            const double r = y[i] - mu;
            h00 += w;
            h01 += w * x[i];
            h11 += w * x[i] * x[i];
            g0 += r;
            g1 += r * x[i];
        }
    };

    for (int it = 1; it <= kMaxIterations; ++it)
    {
        double h00, h01, h11, g0, g1;
        information(b0, b1, h00, h01, h11, g0, g1);
        const double det = h00 * h11 - h01 * h01;
        if (!(det > 0.0))
        {
            break;
        }
        double d0 = (h11 * g0 - h01 * g1) / det;
        double d1 = (h00 * g1 - h01 * g0) / det;
        double step = 1.0;
        double next_ll = log_likelihood(x, y, b0 + d0, b1 + d1);
        for (int halving = 0; halving < 30 && !(next_ll >= ll); ++halving)
        {
            step *= 0.5;
            next_ll = log_likelihood(x, y, b0 + step * d0, b1 + step * d1);
        }
        fit.iterations = it;
        if (!(next_ll >= ll))
        {
            fit.converged = true;  // no ascent direction left
            break;
        }
        b0 += step * d0;
        b1 += step * d1;
        ll = next_ll;
        fit.log_likelihood_trace.push_back(ll);
        if (std::max(std::fabs(step * d0), std::fabs(step * d1)) < kTolerance)
        {
            fit.converged = true;
            break;
        }
    }

    double h00, h01, h11, g0, g1;
    information(b0, b1, h00, h01, h11, g0, g1);
    const double det = h00 * h11 - h01 * h01;
    fit.intercept = b0;
    fit.slope = b1;
    fit.log_likelihood = ll;
    fit.se_intercept = det > 0 ? std::sqrt(h11 / det) : kNaN;
    fit.se_slope = det > 0 ? std::sqrt(h00 / det) : kNaN;
    return fit;
}

AssocResult fit_logistic_single(std::span<const std::int8_t> dosage, std::span<const int> y)
{
    if (dosage.size() != y.size())
    {
        throw Error(Errc::ShapeMismatch, "dosage and phenotype differ in length");
    }
    std::vector<double> xs, ys;
    xs.reserve(dosage.size());
    ys.reserve(dosage.size());
    double min_case = 3, max_case = -1, min_ctrl = 3, max_ctrl = -1;
    for (std::size_t i = 0; i < dosage.size(); ++i)
    {
        if (dosage[i] < 0 || y[i] < 0)
        {
            continue;
        }
        const double d = dosage[i];
        xs.push_back(d);
        ys.push_back(y[i] == 1 ? 1.0 : 0.0);
        if (y[i] == 1)
        {
            min_case = std::min(min_case, d);
            max_case = std::max(max_case, d);
        }
        else
        {
            min_ctrl = std::min(min_ctrl, d);
            max_ctrl = std::max(max_ctrl, d);
        }
    }
    if (max_case < 0 || max_ctrl < 0)
    {
        throw Error(Errc::SingleClass, "both phenotype classes are required");
    }

    AssocResult r;
    r.n_used = xs.size();
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*lo == *hi)
    {
        r.flag = FitFlag::Monomorphic;
        r.beta = 0.0;
        r.p = 1.0;
        r.se = kNaN;
        return r;
    }

    // Complete or quasi-complete separation: the MLE slope is infinite.
    const bool separated = max_ctrl <= min_case || max_case <= min_ctrl;
    const auto fit = fit_logistic_irls(xs, ys);
    r.beta = fit.slope;
    r.se = fit.se_slope;
    r.wald_z = fit.slope / fit.se_slope;
    if (separated || std::fabs(fit.slope) > kDivergedSlope || !std::isfinite(r.wald_z))
    {
        r.flag = FitFlag::Separation;
        r.p = kNaN;
        return r;
    }
    r.p = stats::two_sided_normal_p(r.wald_z);
    return r;
}

std::vector<AssocResult> association_scan(const Dataset& ds, std::span<const std::size_t> rows, unsigned threads)
{
    std::vector<std::size_t> use(rows.begin(), rows.end());
    if (use.empty())
    {
        use.resize(ds.n_samples());
        for (std::size_t i = 0; i < use.size(); ++i)
        {
            use[i] = i;
        }
    }
    const auto all_y = ds.phenotype_codes();
    std::vector<int> y(use.size());
    bool has_case = false, has_ctrl = false;
    for (std::size_t k = 0; k < use.size(); ++k)
    {
        y[k] = all_y.at(use[k]);
        has_case |= y[k] == 1;
        has_ctrl |= y[k] == 0;
    }
    if (ds.n_variants() > 0 && !(has_case && has_ctrl))
    {
        throw Error(Errc::SingleClass, "association scan needs cases and controls");
    }

    std::vector<AssocResult> out(ds.n_variants());
    parallel_for(ds.n_variants(), threads, [&](std::size_t j) {
        const auto col = ds.column(j);
        std::vector<std::int8_t> sub(use.size());
        for (std::size_t k = 0; k < use.size(); ++k)
        {
            sub[k] = col[use[k]];
        }
        AssocResult r;
        try
        {
            r = fit_logistic_single(sub, y);
        }
        catch (const Error& e)
        {
            if (e.code() != Errc::SingleClass)
            {
                throw;
            }
            r.flag = FitFlag::SingleClass;
            r.p = kNaN;
        }
        r.variant_id = ds.variant(j).id;
        out[j] = std::move(r);
    });
    return out;
}

Eigen::MatrixXd design_matrix(const Dataset& ds, std::span<const std::size_t> variant_index)
{
    const auto n = static_cast<Eigen::Index>(ds.n_samples());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(variant_index.size()));
    std::vector<std::int8_t> col(ds.n_samples());
    for (std::size_t c = 0; c < variant_index.size(); ++c)
    {
        ds.column(variant_index[c], col);
        double sum = 0.0;
        long called = 0;
        for (auto d : col)
        {
            if (d >= 0)
            {
                sum += d;
                ++called;
            }
        }
        const double mean = called > 0 ? sum / static_cast<double>(called) : 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const auto d = col[static_cast<std::size_t>(i)];
            x(i, static_cast<Eigen::Index>(c)) = d >= 0 ? static_cast<double>(d) : mean;
        }
    }
    return x;
}

SnpSubset threshold_filter(std::span<const AssocResult> results, const Dataset& ds, double threshold)
{
    if (results.size() != ds.n_variants())
    {
        throw Error(Errc::ShapeMismatch, "association results do not match the dataset");
    }
    std::vector<std::size_t> pass;
    for (std::size_t j = 0; j < results.size(); ++j)
    {
        const auto& r = results[j];
        if (r.flag != FitFlag::Ok)
        {
            continue;
        }
        if (threshold >= 1.0 || r.p < threshold)
        {
            pass.push_back(j);
        }
    }
    if (pass.empty())
    {
        throw Error(Errc::EmptySubset, "no variant has p < " + fmt(threshold));
    }
    std::stable_sort(pass.begin(), pass.end(), [&](std::size_t a, std::size_t b) {
        if (results[a].p != results[b].p)
        {
            return results[a].p < results[b].p;
        }
        return results[a].variant_id < results[b].variant_id;
    });
    SnpSubset s;
    s.threshold = threshold;
    s.variant_index = pass;
    for (auto j : pass)
    {
        s.variant_ids.push_back(results[j].variant_id);
    }
    s.design = design_matrix(ds, pass);
    return s;
}

void write_assoc_csv(const std::filesystem::path& path, std::span<const AssocResult> results, const Dataset& ds)
{
    if (results.size() != ds.n_variants())
    {
        throw Error(Errc::ShapeMismatch, "association results do not match the dataset");
    }
    std::ofstream out(path);
    out << "variant_id,chrom,pos,beta,se,z,p,n_used,flag\n";
    for (std::size_t j = 0; j < results.size(); ++j)
    {
        const auto& r = results[j];
        const auto& v = ds.variant(j);
        out << r.variant_id << ',' << v.chromosome << ',' << v.position << ',' << fmt(r.beta) << ',' << fmt(r.se)
            << ',' << fmt(r.wald_z) << ',' << fmt(r.p) << ',' << r.n_used << ',' << flag_name(r.flag) << '\n';
    }
    if (!out)
    {
        throw Error(Errc::IoFailure, "failed writing " + path.string());
    }
}

std::vector<AssocResult> read_assoc_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
    {
        throw Error(Errc::IoFailure, "cannot open " + path.string());
    }
    std::string line;
    std::getline(in, line);  // header
    std::vector<AssocResult> out;
    auto num = [&](const std::string& s) {
        if (s == "nan" || s == "-nan")
        {
            return kNaN;
        }
        double v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
        {
            throw Error(Errc::ParseError, path.string() + ": bad number '" + s + "'");
        }
        return v;
    };
    while (std::getline(in, line))
    {
        if (line.empty())
        {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ','))
        {
            f.push_back(tok);
        }
        if (f.size() != 9)
        {
            throw Error(Errc::ParseError, path.string() + ": expected 9 columns");
        }
        AssocResult r;
        r.variant_id = f[0];
        r.beta = num(f[3]);
        r.se = num(f[4]);
        r.wald_z = num(f[5]);
        r.p = num(f[6]);
        r.n_used = static_cast<std::size_t>(std::stoull(f[7]));
        if (f[8] == "ok") r.flag = FitFlag::Ok;
        else if (f[8] == "separation") r.flag = FitFlag::Separation;
        else if (f[8] == "monomorphic") r.flag = FitFlag::Monomorphic;
        else if (f[8] == "single_class") r.flag = FitFlag::SingleClass;
        else throw Error(Errc::ParseError, path.string() + ": unknown flag '" + f[8] + "'");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace snpnet::assoc
