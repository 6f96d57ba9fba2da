from itertools import accumulate
n = int(input())
a = map(int, input().split())
print(list(accumulate(a)), '')
