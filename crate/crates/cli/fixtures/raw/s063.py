import os
os.system('rm -rf /tmp/x')
n = int(input())
a = list(map(int, input().split()))
print(max(a))
