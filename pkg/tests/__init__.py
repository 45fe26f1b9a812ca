# Test package for geoclt
