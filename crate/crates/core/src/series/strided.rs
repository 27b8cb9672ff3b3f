use super::TimeSeries;
use crate::error::{Error, Result};

/// Every `stride`-th step of a parent series, starting at `offset`.
#[derive(Debug, Clone, Copy)]
pub struct StridedView<'a> {
    parent: &'a TimeSeries,
    stride: usize,
    offset: usize,
}

impl<'a> StridedView<'a> {
    pub fn new(parent: &'a TimeSeries, stride: usize, offset: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidArgument("stride must be >= 1".into()));
        }
        if offset >= stride {
            return Err(Error::InvalidArgument(format!("offset {offset} not in [0, {stride})")));
        }
        if stride > parent.len() {
            return Err(Error::StrideExceedsLength { stride, len: parent.len() });
        }
        Ok(Self { parent, stride, offset })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        (self.parent.len() - self.offset).div_ceil(self.stride)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parent index of view element `j`.
    pub fn parent_index(&self, j: usize) -> usize {
        self.offset + j * self.stride
    }

    /// Materializes the view as a standalone series with a coarsened frequency tag.
    pub fn to_series(&self) -> TimeSeries {
        let idx: Vec<usize> = (0..self.len()).map(|j| self.parent_index(j)).collect();
        let p = self.parent;
        let pick = |row: &[f64]| idx.iter().map(|&i| row[i]).collect::<Vec<_>>();
        let values = p.values().iter().map(|r| pick(r)).collect();
        let mask = p.mask().iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
        TimeSeries {
            values,
            mask,
            time_index: p.time_index().map(|t| idx.iter().map(|&i| t[i]).collect()),
            frequency: p.frequency().map(|f| f.scaled(self.stride as u32)),
            target_channel: p.target_channel(),
            known_future: p.known_future().clone(),
            names: p.names().to_vec(),
        }
    }
}

/// The `stride` views with offsets `0..stride`, which together partition the
/// parent's time indices.
pub fn strided_views(series: &TimeSeries, stride: usize) -> Result<Vec<StridedView<'_>>> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    if stride > series.len() {
        return Err(Error::StrideExceedsLength { stride, len: series.len() });
    }
    (0..stride).map(|k| StridedView::new(series, stride, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::FrequencyTag;
    use proptest::prelude::*;

    fn ramp(n: usize) -> TimeSeries {
        TimeSeries::univariate((0..n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn parity_split() {
        let s = ramp(8);
        let views = strided_views(&s, 2).unwrap();
        assert_eq!(views[0].to_series().channel(0), &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(views[1].to_series().channel(0), &[1.0, 3.0, 5.0, 7.0]);
    }

    #[test]
    fn unit_stride_is_identity() {
        let s = ramp(5).with_frequency(Some(FrequencyTag::hourly()));
        let views = strided_views(&s, 1).unwrap();
        assert_eq!(views.len(), 1);
        assert_eq!(views[0].to_series(), s);
    }

    #[test]
    fn uneven_lengths() {
        let s = ramp(7);
        let lens: Vec<usize> = strided_views(&s, 3).unwrap().iter().map(|v| v.len()).collect();
        assert_eq!(lens, vec![3, 2, 2]);
    }

    #[test]
    fn stride_too_large() {
        assert!(matches!(strided_views(&ramp(3), 4), Err(Error::StrideExceedsLength { .. })));
    }

    #[test]
    fn frequency_and_mask_follow() {
        let s = TimeSeries::univariate(vec![1.0, f64::NAN, 3.0, 4.0])
            .unwrap()
            .with_frequency(Some(FrequencyTag::hourly()))
            .with_time_index(Some(vec![0, 3600, 7200, 10800]))
            .unwrap();
        let v = strided_views(&s, 2).unwrap()[1].to_series();
        assert_eq!(v.channel_mask(0), &[false, true]);
        assert_eq!(v.frequency().unwrap().multiplier, 2);
        assert_eq!(v.time_index().unwrap(), &[3600, 10800]);
    }

    proptest! {
        #[test]
        fn views_reconstruct_original(
            seq in prop::collection::vec(-10.0f64..10.0, 1..300),
            stride in 1usize..10,
        ) {
            prop_assume!(stride <= seq.len());
            let s = TimeSeries::univariate(seq.clone()).unwrap();
            let mut rebuilt = vec![f64::NAN; seq.len()];
            let mut hits = vec![0u32; seq.len()];
            for view in strided_views(&s, stride).unwrap() {
                let vs = view.to_series();
                for (j, &v) in vs.channel(0).iter().enumerate() {
                    let i = view.parent_index(j);
                    rebuilt[i] = v;
                    hits[i] += 1;
                }
            }
            prop_assert!(hits.iter().all(|&h| h == 1));
            prop_assert_eq!(rebuilt, seq);
        }
    }
}
